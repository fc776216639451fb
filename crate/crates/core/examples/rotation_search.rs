//! Rotation search on 1000 unit-vector pairs, 95% of them outliers.
//!
//! `cargo run --release --example rotation_search -- [outlier_ratio] [seed]`

use ransic::synth::gen_rotation_problem;
use ransic::{geodesic_distance, run_rotation_search, RotationSearchConfig};

fn main() -> ransic::Result<()> {
    let mut args = std::env::args().skip(1);
    let ratio: f64 = args.next().map_or(0.95, |a| a.parse().expect("outlier ratio"));
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));

    let problem = gen_rotation_problem(1000, ratio, 0.01, seed)?;
    let cfg = RotationSearchConfig { seed, ..Default::default() };
    let res = run_rotation_search(&problem.corr, &cfg)?.ensure_terminated()?;

    let true_inliers = problem.inlier_mask.iter().filter(|&&m| m).count();
    let found = res.inliers.iter().filter(|&&i| problem.inlier_mask[i]).count();
    println!("outlier ratio    {ratio}");
    println!("samples drawn    {}", res.samples_drawn);
    println!("graph vertices   {}", res.vertices_created);
    println!("final degree K   {}", res.final_k);
    println!("rotation error   {:.4} deg", geodesic_distance(&res.rotation, &problem.truth).to_degrees());
    println!("inliers          {} returned, {found}/{true_inliers} true", res.inliers.len());
    println!("estimate         {:?}", res.rotation.to_row_array());
    Ok(())
}
