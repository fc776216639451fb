//! RANSIC for rotation search.
//!
//! Vertices are pairs of vector correspondences that pass the length
//! invariant; two vertices share an edge when the rotations solved from each
//! lie within `theta` of one another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consensus::{
    extract_inliers, termination_check, CompatGraph, CorrespondenceSet, TerminationParams, Vertex,
};
use crate::error::{RansicError, Result};
use crate::geom::{geodesic_distance, solve_rotation_svd, Rotation, Vec3};

const MIN_NORM: f64 = 1e-12;
const REFINE_ROUNDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RotationSearchConfig {
    /// Slack added to the length-invariant bound.
    pub zeta: f64,
    /// Geodesic bound (radians) between compatible vertex rotations.
    pub theta: f64,
    pub termination: TerminationParams,
    pub k_init: usize,
    pub max_samples: u64,
    pub seed: u64,
}

impl Default for RotationSearchConfig {
    /// N = 1000 setup: ζ = 0.008, θ = 5°, υ = 2.6, τ = 10, σ = 0.01.
    fn default() -> Self {
        Self {
            zeta: 0.008,
            theta: 5f64.to_radians(),
            termination: TerminationParams {
                upsilon: 2.6,
                tau: 10,
                sigma: 0.01,
            },
            k_init: 1,
            max_samples: 10_000_000,
            seed: 0,
        }
    }
}

impl RotationSearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.termination.validate()?;
        if !(self.zeta >= 0.0) {
            return Err(RansicError::InvalidParam(format!("zeta must be >= 0, got {}", self.zeta)));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::PI) {
            return Err(RansicError::InvalidParam(format!(
                "theta must lie in (0, pi), got {}",
                self.theta
            )));
        }
        if self.k_init < 1 || self.max_samples < 1 {
            return Err(RansicError::InvalidParam("k_init and max_samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationSearchResult {
    pub rotation: Rotation,
    pub inliers: Vec<usize>,
    pub samples_drawn: u64,
    pub vertices_created: usize,
    /// False when the sample budget ran out; `rotation` is then the best
    /// hypothesis seen (identity if none was ever evaluated).
    pub terminated: bool,
    pub final_k: usize,
}

impl RotationSearchResult {
    pub fn ensure_terminated(self) -> Result<Self> {
        if self.terminated {
            Ok(self)
        } else {
            Err(RansicError::SampleBudgetExhausted {
                samples: self.samples_drawn,
            })
        }
    }
}

fn normalized(v: &Vec3) -> Result<Vec3> {
    let n = v.norm();
    if !(n > MIN_NORM) {
        return Err(RansicError::ZeroVector);
    }
    Ok(v / n)
}

/// Length invariant between two vector correspondences.
///
/// The chord length between the normalised vectors is preserved by any
/// rotation, so for inliers `f = |‖b₁*−b₂*‖ − ‖a₁*−a₂*‖|` stays within
/// `X* + ζ`, where `X*` absorbs the effect of the (unnormalised) `b` norms.
pub fn length_compat(a1: &Vec3, b1: &Vec3, a2: &Vec3, b2: &Vec3, zeta: f64) -> Result<bool> {
    let (na1, nb1, na2, nb2) = (a1.norm(), b1.norm(), a2.norm(), b2.norm());
    if [na1, nb1, na2, nb2].iter().any(|n| !(*n > MIN_NORM)) {
        return Err(RansicError::ZeroVector);
    }
    let f = ((b1 / nb1 - b2 / nb2).norm() - (a1 / na1 - a2 / na2).norm()).abs();
    let x_star = (a1 / nb1 - a2 / nb2 - a1 / na1 + a2 / na2).norm();
    Ok(f <= x_star + zeta)
}

pub fn rotation_edge(v1: &Vertex<Rotation>, v2: &Vertex<Rotation>, theta: f64) -> bool {
    geodesic_distance(&v1.model, &v2.model) <= theta
}

/// `‖R a_i* − b_i*‖` on unit-normalised vectors.
pub fn rotation_residuals(unit_pairs: &[(Vec3, Vec3)], r: &Rotation) -> Vec<f64> {
    unit_pairs.iter().map(|(a, b)| (r.apply(a) - b).norm()).collect()
}

pub(crate) fn unit_pairs(corr: &CorrespondenceSet) -> Result<Vec<(Vec3, Vec3)>> {
    corr.pairs()
        .iter()
        .map(|(a, b)| Ok((normalized(a)?, normalized(b)?)))
        .collect()
}

pub(crate) fn draw_distinct<const K: usize>(rng: &mut ChaCha8Rng, n: usize) -> [usize; K] {
    let mut out = [0usize; K];
    for k in 0..K {
        // draw from the n - k unused slots, then skip past used ones in order
        let mut x = rng.random_range(0..n - k);
        let mut used: [usize; K] = out;
        used[..k].sort_unstable();
        for &u in &used[..k] {
            if x >= u {
                x += 1;
            }
        }
        out[k] = x;
    }
    out
}

/// Iteratively re-solves on the gated set until it stops changing, so the
/// returned inliers are exactly the gated set under the returned model.
pub(crate) fn refine<M: Clone>(
    initial: M,
    sigma: f64,
    min_size: usize,
    residuals: impl Fn(&M) -> Vec<f64>,
    solve: impl Fn(&[usize]) -> Result<M>,
) -> (M, Vec<usize>) {
    let mut model = initial;
    let mut inliers = extract_inliers(&residuals(&model), sigma);
    for _ in 0..REFINE_ROUNDS {
        if inliers.len() < min_size {
            break;
        }
        let Ok(next) = solve(&inliers) else { break };
        let next_inliers = extract_inliers(&residuals(&next), sigma);
        if next_inliers.len() < min_size {
            break;
        }
        let stable = next_inliers == inliers;
        model = next;
        inliers = next_inliers;
        if stable {
            break;
        }
    }
    (model, inliers)
}

pub fn run_rotation_search(
    corr: &CorrespondenceSet,
    cfg: &RotationSearchConfig,
) -> Result<RotationSearchResult> {
    cfg.validate()?;
    let n = corr.len();
    if n < 2 {
        return Err(RansicError::DegenerateInput(format!(
            "rotation search needs at least 2 correspondences, got {n}"
        )));
    }
    let unit = unit_pairs(corr)?;
    let sigma = cfg.termination.sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut graph: CompatGraph<Rotation> = CompatGraph::new();
    let mut k = cfg.k_init;
    let mut samples = 0u64;
    // (gated count, rotation) of the best hypothesis checked so far
    let mut best: Option<(usize, Rotation)> = None;
    let mut accepted: Option<Rotation> = None;

    while samples < cfg.max_samples {
        samples += 1;
        let [i, j] = draw_distinct::<2>(&mut rng, n);
        let ((a1, b1), (a2, b2)) = (&unit[i], &unit[j]);
        if !length_compat(a1, b1, a2, b2, cfg.zeta)? || graph.contains(&[i, j]) {
            continue;
        }
        let Ok(local) = solve_rotation_svd(&[unit[i], unit[j]]) else {
            continue;
        };
        let Some(id) = graph.insert(vec![i, j], local) else {
            continue;
        };
        let ys = graph.neighbors(id, |v, u| rotation_edge(v, u, cfg.theta));
        if ys.len() - 1 < k {
            continue;
        }
        let support = graph.union_indices(&ys);
        let mut done = false;
        if let Ok(r) = solve_rotation_svd(&corr_subset(&unit, &support)) {
            let res = rotation_residuals(&unit, &r);
            let gated = extract_inliers(&res, sigma).len();
            if best.is_none_or(|(c, _)| gated > c) {
                best = Some((gated, r));
            }
            if termination_check(&res, &cfg.termination) {
                accepted = Some(r);
                done = true;
            }
        }
        if done {
            log::debug!(
                "rotation search terminated after {samples} samples, {} vertices, K = {k}",
                graph.len()
            );
            break;
        }
        k += 1;
    }

    let terminated = accepted.is_some();
    let start = accepted.or(best.map(|(_, r)| r));
    let (rotation, inliers) = match start {
        Some(r) => refine(
            r,
            sigma,
            2,
            |r| rotation_residuals(&unit, r),
            |idx| solve_rotation_svd(&corr_subset(&unit, idx)),
        ),
        None => (Rotation::identity(), Vec::new()),
    };
    if !terminated {
        log::info!("rotation search exhausted {samples} samples without termination");
    }
    Ok(RotationSearchResult {
        rotation,
        inliers,
        samples_drawn: samples,
        vertices_created: graph.len(),
        terminated,
        final_k: k,
    })
}

fn corr_subset(pairs: &[(Vec3, Vec3)], idx: &[usize]) -> Vec<(Vec3, Vec3)> {
    idx.iter().map(|&i| pairs[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::INLIER_GATE;
    use crate::synth::gen_rotation_problem;
    use std::f64::consts::FRAC_PI_2;

    fn rz(a: f64) -> Rotation {
        Rotation::from_axis_angle(&Vec3::z(), a)
    }

    #[test]
    fn length_compat_noiseless_inliers() {
        let r = Rotation::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 1.1);
        let a1 = Vec3::new(0.6, 0.8, 0.0);
        let a2 = Vec3::new(0.0, 0.6, -0.8);
        assert!(length_compat(&a1, &r.apply(&a1), &a2, &r.apply(&a2), 0.0).unwrap());
    }

    #[test]
    fn length_compat_brute_force_rejection() {
        let r = rz(FRAC_PI_2);
        let (a1, a2) = (Vec3::x(), Vec3::y());
        let b1 = r.apply(&a1);
        let b2 = Vec3::new(0.0, -0.6, 0.8);
        // f = | ‖b1 − b2‖ − ‖e1 − e2‖ |, X* = 0 since every norm is 1
        let f = ((b1 - b2).norm() - 2f64.sqrt()).abs();
        assert!(f > 0.012);
        assert!(!length_compat(&a1, &b1, &a2, &b2, 0.012).unwrap());
        assert!(length_compat(&a1, &b1, &a2, &b2, f).unwrap());
    }

    #[test]
    fn length_compat_zero_vector() {
        let z = Vec3::zeros();
        assert!(matches!(
            length_compat(&z, &Vec3::x(), &Vec3::y(), &Vec3::y(), 0.1),
            Err(RansicError::ZeroVector)
        ));
    }

    #[test]
    fn rotation_edge_identical_and_boundary() {
        let v = |r| Vertex { indices: vec![0, 1], model: r };
        let r = Rotation::from_axis_angle(&Vec3::new(0.3, -1.0, 0.2), 0.4);
        assert!(rotation_edge(&v(r), &v(r), 1e-9));
        let theta = 0.1;
        let r2 = r * Rotation::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), theta);
        let d = geodesic_distance(&r, &r2);
        assert!(rotation_edge(&v(r), &v(r2), d));
        assert!(!rotation_edge(&v(r), &v(r2), d * (1.0 - 1e-9)));
    }

    #[test]
    fn rotation_edge_disjoint_noiseless_pairs() {
        let p = gen_rotation_problem(4, 0.0, 0.0, 3).unwrap();
        let pairs = p.corr.pairs();
        let r1 = solve_rotation_svd(&pairs[0..2]).unwrap();
        let r2 = solve_rotation_svd(&pairs[2..4]).unwrap();
        assert!(geodesic_distance(&r1, &r2) < 1e-9);
    }

    #[test]
    fn draw_distinct_is_distinct_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let [a, b, c] = draw_distinct::<3>(&mut rng, 5);
            assert!(a != b && b != c && a != c);
            assert!(a < 5 && b < 5 && c < 5);
        }
        let mut counts = [0usize; 3];
        for _ in 0..30000 {
            let [a, _] = draw_distinct::<2>(&mut rng, 3);
            counts[a] += 1;
        }
        assert!(counts.iter().all(|&c| (9000..11000).contains(&c)), "{counts:?}");
    }

    #[test]
    fn noiseless_all_inliers_terminates_exactly() {
        let p = gen_rotation_problem(100, 0.0, 0.0, 11).unwrap();
        let cfg = RotationSearchConfig {
            termination: TerminationParams { upsilon: 2.6, tau: 10, sigma: 0.01 },
            ..Default::default()
        };
        let res = run_rotation_search(&p.corr, &cfg).unwrap();
        assert!(res.terminated);
        assert_eq!(res.inliers.len(), 100);
        assert!(geodesic_distance(&res.rotation, &p.truth) < 1e-6);
        // K starts at 1, so the second vertex is the first with a peer
        assert_eq!(res.vertices_created, 2);
    }

    #[test]
    fn inliers_within_gate_of_returned_rotation() {
        let p = gen_rotation_problem(300, 0.7, 0.01, 5).unwrap();
        let cfg = RotationSearchConfig { seed: 9, ..Default::default() };
        let res = run_rotation_search(&p.corr, &cfg).unwrap();
        let unit = unit_pairs(&p.corr).unwrap();
        let r = rotation_residuals(&unit, &res.rotation);
        assert!(res.inliers.iter().all(|&i| r[i] <= INLIER_GATE * 0.01));
    }

    #[test]
    fn deterministic_under_seed() {
        let p = gen_rotation_problem(200, 0.8, 0.01, 21).unwrap();
        let cfg = RotationSearchConfig { seed: 4, ..Default::default() };
        let a = run_rotation_search(&p.corr, &cfg).unwrap();
        let b = run_rotation_search(&p.corr, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_exhaustion_reports_not_terminated() {
        let p = gen_rotation_problem(200, 0.99, 0.01, 2).unwrap();
        let cfg = RotationSearchConfig { max_samples: 50, ..Default::default() };
        let res = run_rotation_search(&p.corr, &cfg).unwrap();
        assert!(!res.terminated);
        assert_eq!(res.samples_drawn, 50);
        assert!(matches!(
            res.ensure_terminated(),
            Err(RansicError::SampleBudgetExhausted { samples: 50 })
        ));
    }

    #[test]
    fn k_is_non_decreasing_and_starts_at_k_init() {
        let p = gen_rotation_problem(400, 0.9, 0.01, 8).unwrap();
        let cfg = RotationSearchConfig { k_init: 2, seed: 1, ..Default::default() };
        let res = run_rotation_search(&p.corr, &cfg).unwrap();
        assert!(res.final_k >= 2);
    }

    #[test]
    fn rejects_bad_input() {
        let corr = CorrespondenceSet::new(vec![(Vec3::x(), Vec3::x())]);
        assert!(run_rotation_search(&corr, &RotationSearchConfig::default()).is_err());
        let cfg = RotationSearchConfig { theta: 4.0, ..Default::default() };
        let p = gen_rotation_problem(10, 0.0, 0.0, 1).unwrap();
        assert!(matches!(run_rotation_search(&p.corr, &cfg), Err(RansicError::InvalidParam(_))));
    }
}
