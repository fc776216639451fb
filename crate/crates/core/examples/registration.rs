//! Unknown-scale point cloud registration at 95% outliers.

use ransic::synth::{gen_registration_problem, ScaleMode};
use ransic::{geodesic_distance, run_registration, RegistrationConfig};

fn main() -> ransic::Result<()> {
    let seed = std::env::args().nth(1).map_or(3, |a| a.parse().expect("seed"));
    let problem = gen_registration_problem(1000, 0.95, 0.01, ScaleMode::Unknown, seed)?;

    let cfg = RegistrationConfig { seed, ..Default::default() };
    let res = run_registration(&problem.corr, &cfg)?.ensure_terminated()?;

    let (est, truth) = (&res.transform, &problem.truth);
    println!("round used       {}", res.iteration_used);
    println!("samples drawn    {:?}", res.samples_drawn);
    println!("scale            {:.5} (truth {:.5})", est.scale, truth.scale);
    println!("rotation error   {:.4} deg", geodesic_distance(&est.rotation, &truth.rotation).to_degrees());
    println!("translation err  {:.5}", (est.translation - truth.translation).norm());
    println!("inliers          {}", res.inliers.len());
    Ok(())
}
