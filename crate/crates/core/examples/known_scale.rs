//! Known-scale registration at 99% outliers: ten correspondences out of a
//! thousand are real. Runs take seconds and some exhaust their sample budget;
//! those report `terminated = false` rather than a confident wrong answer.

use std::time::Instant;

use ransic::synth::{gen_registration_problem, ScaleMode};
use ransic::{geodesic_distance, run_registration, RegistrationConfig};

fn main() -> ransic::Result<()> {
    let runs: u64 = std::env::args().nth(1).map_or(3, |a| a.parse().expect("run count"));
    let cfg = RegistrationConfig {
        known_scale: Some(1.0),
        max_samples: 5_000_000,
        ..Default::default()
    };
    println!("seed  terminated  round  samples     rot_err_deg  t_err    secs");
    for seed in 0..runs {
        let p = gen_registration_problem(1000, 0.99, 0.01, ScaleMode::Known, seed)?;
        let started = Instant::now();
        let res = run_registration(&p.corr, &RegistrationConfig { seed, ..cfg.clone() })?;
        println!(
            "{seed:<5} {:<11} {:<6} {:<11} {:<12.4} {:<8.5} {:.2}",
            res.terminated,
            res.iteration_used,
            res.total_samples(),
            geodesic_distance(&res.transform.rotation, &p.truth.rotation).to_degrees(),
            (res.transform.translation - p.truth.translation).norm(),
            started.elapsed().as_secs_f64(),
        );
    }
    Ok(())
}
