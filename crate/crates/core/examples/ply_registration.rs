//! Registration on a cloud loaded from an ASCII PLY file.
//!
//! With no argument a torus is written to the temp directory and used.

use std::f64::consts::TAU;
use std::path::PathBuf;

use ransic::io::{create_buffered, read_ply_path, write_ply_ascii};
use ransic::synth::{gen_registration_problem_from_cloud, ScaleMode};
use ransic::{geodesic_distance, run_registration, RegistrationConfig, Vec3};

fn torus(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let u = TAU * i as f64 / n as f64;
            let v = TAU * ((i * 37) % n) as f64 / n as f64;
            Vec3::new((2.0 + v.cos()) * u.cos(), (2.0 + v.cos()) * u.sin(), v.sin())
        })
        .collect()
}

fn main() -> ransic::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("ransic_torus.ply");
            write_ply_ascii(create_buffered(&p)?, &torus(1000))?;
            p
        }
    };
    let cloud = read_ply_path(&path)?;
    println!("loaded {} points from {}", cloud.len(), path.display());

    let p = gen_registration_problem_from_cloud(&cloud, 0.9, 0.01, ScaleMode::Unknown, 9)?;
    let res = run_registration(&p.corr, &RegistrationConfig { seed: 9, ..Default::default() })?;
    println!("terminated      {}", res.terminated);
    println!("scale           {:.5} (truth {:.5})", res.transform.scale, p.truth.scale);
    println!(
        "rotation error  {:.4} deg",
        geodesic_distance(&res.transform.rotation, &p.truth.rotation).to_degrees()
    );
    println!("translation err {:.5}", (res.transform.translation - p.truth.translation).norm());
    Ok(())
}
