//! The compatibility tests on their own: how often each one passes for
//! clean samples and for samples containing an outlier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ransic::registration::{scale_compat, translation_compat, TriSample};
use ransic::rotation_search::length_compat;
use ransic::synth::{gen_registration_problem, gen_rotation_problem, ScaleMode};
use ransic::{RegistrationConfig, RotationSearchConfig};

const TRIALS: usize = 20_000;

fn main() -> ransic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let rot = gen_rotation_problem(1000, 0.5, 0.01, 1)?;
    let zeta = RotationSearchConfig::default().zeta;
    let mut pass = [[0usize; 2]; 2]; // [clean, dirty][tried, passed]
    for _ in 0..TRIALS {
        let (i, j) = (rng.random_range(0..1000), rng.random_range(0..1000));
        if i == j {
            continue;
        }
        let ((a1, b1), (a2, b2)) = (rot.corr.get(i), rot.corr.get(j));
        let dirty = usize::from(!(rot.inlier_mask[i] && rot.inlier_mask[j]));
        pass[dirty][0] += 1;
        pass[dirty][1] += usize::from(length_compat(a1, b1, a2, b2, zeta)?);
    }
    report("length", pass);

    let reg = gen_registration_problem(1000, 0.5, 0.01, ScaleMode::Unknown, 1)?;
    let bounds = RegistrationConfig::default().bounds(0);
    let (mut scale, mut both) = ([[0usize; 2]; 2], [[0usize; 2]; 2]);
    for _ in 0..TRIALS {
        let idx = [0; 3].map(|_| rng.random_range(0..1000));
        if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
            continue;
        }
        let Ok(mut tri) = TriSample::new(&reg.corr, idx) else { continue };
        let dirty = usize::from(!idx.iter().all(|&i| reg.inlier_mask[i]));
        let s = scale_compat(&tri, bounds.alpha, None);
        scale[dirty][0] += 1;
        scale[dirty][1] += usize::from(s);
        both[dirty][0] += 1;
        both[dirty][1] += usize::from(s && translation_compat(&mut tri, bounds.beta, None)?);
    }
    report("scale", scale);
    report("scale+translation", both);
    Ok(())
}

fn report(name: &str, counts: [[usize; 2]; 2]) {
    let pct = |c: [usize; 2]| 100.0 * c[1] as f64 / c[0].max(1) as f64;
    println!("{name:<18} clean {:6.2}%   with outlier {:6.2}%", pct(counts[0]), pct(counts[1]));
}
