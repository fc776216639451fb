//! Writes a synthetic problem as CSV plus ground-truth sidecar, reads it back
//! and scores a solve against the mask, the same path `ransic solve` takes.

use std::fs::File;

use ransic::bench::{metrics, solve, ProblemKind, SolverSettings, SolverSpec};
use ransic::io::{
    create_buffered, read_correspondences_path, read_truth, truth_sidecar_path, write_correspondences, write_truth,
    GroundTruth,
};
use ransic::synth::gen_rotation_problem;

fn main() -> ransic::Result<()> {
    let dir = std::env::temp_dir();
    let csv = dir.join("ransic_example.csv");

    let p = gen_rotation_problem(500, 0.8, 0.01, 4)?;
    write_correspondences(create_buffered(&csv)?, &p.corr, Some(&p.inlier_mask))?;
    let truth = GroundTruth {
        problem: "rotation".into(),
        n: 500,
        outlier_ratio: 0.8,
        sigma: 0.01,
        seed: 4,
        scale: 1.0,
        rotation: p.truth.to_row_array(),
        translation: [0.0; 3],
    };
    write_truth(create_buffered(truth_sidecar_path(&csv))?, &truth)?;

    let file = read_correspondences_path(&csv)?;
    let truth = read_truth(File::open(truth_sidecar_path(&csv))?)?;
    let est = solve(ProblemKind::Rotation, &file.corr, SolverSpec::Ransic, &SolverSettings::default(), 0)?;
    let m = metrics(ProblemKind::Rotation, &truth.transform()?, &est, file.mask.as_deref());
    println!("wrote {}", csv.display());
    println!("{m:#?}");
    Ok(())
}
