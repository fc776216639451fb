//! Monte-Carlo sweep through the library API. Prints per-run records and
//! the per-cell summary as CSV.

use std::io::stdout;

use ransic::bench::{run_bench, summarize, write_summary, BenchPlan, ProblemKind, SolverSpec, SuccessCriteria};
use ransic::io::{write_results, ResultFormat};

fn main() -> ransic::Result<()> {
    let plan = BenchPlan {
        solvers: vec![SolverSpec::Ransic, SolverSpec::Ransac { max_iterations: 1000 }],
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        base_seed: 42,
        ..BenchPlan::new(ProblemKind::Register, vec![500, 1000], vec![0.5, 0.9], 5)
    };
    let records = run_bench(&plan)?;
    write_results(stdout().lock(), &records, ResultFormat::Csv)?;
    println!();
    write_summary(stdout().lock(), &summarize(&records, &SuccessCriteria::default()))
}
