//! RANSIC against RANSAC(100) and RANSAC(1000) on the same rotation-search
//! instances across outlier ratios.

use ransic::bench::{cell_seed, generate, median, solve, solver_seed, ProblemKind, SolverSettings, SolverSpec};
use ransic::geodesic_distance;

const RUNS: usize = 20;

fn main() -> ransic::Result<()> {
    let solvers = [
        SolverSpec::Ransic,
        SolverSpec::Ransac { max_iterations: 100 },
        SolverSpec::Ransac { max_iterations: 1000 },
    ];
    let settings = SolverSettings::with_sigma(0.01);
    println!("{:<8} {:<12} {:>8} {:>14}", "ratio", "solver", "success", "median_err_deg");
    for ratio in [0.5, 0.8, 0.9, 0.95, 0.98] {
        for solver in solvers {
            let mut errs = Vec::with_capacity(RUNS);
            for run in 0..RUNS {
                let seed = cell_seed(0, ProblemKind::Rotation, 1000, ratio, run);
                let inst = generate(ProblemKind::Rotation, 1000, ratio, 0.01, seed)?;
                let est = solve(ProblemKind::Rotation, &inst.corr, solver, &settings, solver_seed(seed, solver))?;
                errs.push(geodesic_distance(&est.transform.rotation, &inst.truth.rotation).to_degrees());
            }
            let ok = errs.iter().filter(|&&e| e < 5.0).count();
            println!(
                "{ratio:<8} {:<12} {:>7}% {:>14.3}",
                solver.to_string(),
                100 * ok / RUNS,
                median(&errs).unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
