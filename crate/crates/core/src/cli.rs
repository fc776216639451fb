//! `ransic synth | solve | bench`.
//!
//! Exit codes: 0 success, 1 I/O or data errors, 2 flag errors, 3 when the
//! solver ran out of samples (the best-effort estimate is still printed).

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    metrics, run_bench, solve, summarize, write_summary, BenchPlan, Estimate, ProblemKind, SolverSettings,
    SolverSpec, SuccessCriteria,
};
use crate::error::{RansicError, Result};
use crate::geom::SimTransform;
use crate::io::{
    create_buffered, read_correspondences_path, read_ply_path, read_truth, truth_sidecar_path, write_correspondences,
    write_results, write_truth, GroundTruth, ResultFormat, ResultRecord,
};
use crate::synth::{gen_registration_problem, gen_registration_problem_from_cloud, gen_rotation_problem, ScaleMode};

#[derive(Debug, Parser)]
#[command(name = "ransic", version, about = "Robust rotation search and point cloud registration")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic correspondence file plus a ground-truth sidecar.
    Synth(SynthArgs),
    /// Run a solver on a correspondence file.
    Solve(SolveArgs),
    /// Monte-Carlo sweep over sizes, outlier ratios and solvers.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Problem {
    Rotation,
    Register,
    RegisterKnownScale,
}

impl From<Problem> for ProblemKind {
    fn from(p: Problem) -> Self {
        match p {
            Problem::Rotation => ProblemKind::Rotation,
            Problem::Register => ProblemKind::Register,
            Problem::RegisterKnownScale => ProblemKind::RegisterKnownScale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScaleArg {
    Unknown,
    Known,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for ResultFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ResultFormat::Csv,
            FormatArg::Jsonl => ResultFormat::JsonLines,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    outlier_ratio: f64,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the sidecar goes next to it as `<stem>.truth.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    scale_mode: Option<ScaleArg>,
    /// Source cloud (ASCII PLY) for registration problems.
    #[arg(long)]
    cloud: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long = "in")]
    input: PathBuf,
    /// Ground-truth sidecar; defaults to `<stem>.truth.json` when it exists.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// `ransic` or `ransac` (optionally `ransac:<cap>`).
    #[arg(long, default_value = "ransic")]
    solver: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_samples: Option<u64>,
    /// Result record destination, `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long, default_value_t = 0.008)]
    zeta: f64,
    /// Degrees.
    #[arg(long, default_value_t = 5.0)]
    theta: f64,
    #[arg(long)]
    upsilon: Option<f64>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 3.6)]
    alpha_mult1: f64,
    #[arg(long, default_value_t = 5.4)]
    beta_mult1: f64,
    #[arg(long, default_value_t = 3.2)]
    alpha_mult2: f64,
    #[arg(long, default_value_t = 4.8)]
    beta_mult2: f64,
    /// Degrees.
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    /// Fix the scale (1 when given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "1")]
    known_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Comma-separated, e.g. `ransic,ransac:100`.
    #[arg(long, value_delimiter = ',', default_value = "ransic")]
    solvers: Vec<String>,
    #[arg(long)]
    max_samples: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write zero wall times so output is reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Per-run records, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Per-cell aggregate table (CSV), `-` for stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn exit_code(e: &RansicError) -> i32 {
    match e {
        RansicError::InvalidParam(_) => 2,
        RansicError::SampleBudgetExhausted { .. } => 3,
        _ => 1,
    }
}

fn init_logging() {
    let level = match std::env::var("RANSIC_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Warn,
    };
    let off = std::env::var("RANSIC_LOG").as_deref() == Ok("off");
    let _ = env_logger::Builder::new()
        .filter_level(if off { log::LevelFilter::Off } else { level })
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let res = match cli.cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn is_stdout(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn open_out(p: &Path) -> Result<Box<dyn Write>> {
    if is_stdout(p) {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(create_buffered(p)?))
    }
}

fn cmd_synth(a: SynthArgs) -> Result<i32> {
    let kind = ProblemKind::from(a.problem);
    let (corr, truth, mask) = match kind {
        ProblemKind::Rotation => {
            if a.cloud.is_some() {
                return Err(RansicError::InvalidParam("--cloud applies to registration only".into()));
            }
            let p = gen_rotation_problem(a.n, a.outlier_ratio, a.sigma, a.seed)?;
            let truth = SimTransform {
                rotation: p.truth,
                ..SimTransform::identity()
            };
            (p.corr, truth, p.inlier_mask)
        }
        _ => {
            let mode = match (kind, a.scale_mode) {
                (ProblemKind::RegisterKnownScale, _) | (_, Some(ScaleArg::Known)) => ScaleMode::Known,
                _ => ScaleMode::Unknown,
            };
            let p = match &a.cloud {
                Some(path) => {
                    let cloud = read_ply_path(path)?;
                    let cloud = if a.n < cloud.len() { &cloud[..a.n] } else { &cloud[..] };
                    gen_registration_problem_from_cloud(cloud, a.outlier_ratio, a.sigma, mode, a.seed)?
                }
                None => gen_registration_problem(a.n, a.outlier_ratio, a.sigma, mode, a.seed)?,
            };
            (p.corr, p.truth, p.inlier_mask)
        }
    };
    let gt = GroundTruth {
        problem: kind.name().into(),
        n: corr.len(),
        outlier_ratio: a.outlier_ratio,
        sigma: a.sigma,
        seed: a.seed,
        scale: truth.scale,
        rotation: truth.rotation.to_row_array(),
        translation: truth.translation.into(),
    };
    if is_stdout(&a.out) {
        write_correspondences(io::stdout().lock(), &corr, Some(&mask))?;
        log::warn!("writing to stdout, ground-truth sidecar skipped");
        return Ok(0);
    }
    write_correspondences(create_buffered(&a.out)?, &corr, Some(&mask))?;
    let sidecar = truth_sidecar_path(&a.out);
    write_truth(create_buffered(&sidecar)?, &gt)?;
    log::info!("wrote {} and {}", a.out.display(), sidecar.display());
    Ok(0)
}

fn format_estimate(kind: ProblemKind, est: &Estimate) -> String {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut s = format!("terminated {}\nsamples {}\n", est.terminated, est.samples_drawn);
    if kind != ProblemKind::Rotation {
        s += &format!("scale {}\n", est.transform.scale);
    }
    s += &format!("rotation {}\n", join(&est.transform.rotation.to_row_array()));
    if kind != ProblemKind::Rotation {
        let t: [f64; 3] = est.transform.translation.into();
        s += &format!("translation {}\n", join(&t));
    }
    let idx: Vec<String> = est.inliers.iter().map(|i| i.to_string()).collect();
    s += &format!("inliers {}\n", idx.join(" "));
    s
}

fn cmd_solve(a: SolveArgs) -> Result<i32> {
    let kind = ProblemKind::from(a.problem);
    let solver: SolverSpec = a.solver.parse()?;
    let file = read_correspondences_path(&a.input)?;

    let mut settings = SolverSettings::with_sigma(a.sigma);
    let rot = &mut settings.rotation;
    rot.zeta = a.zeta;
    rot.theta = a.theta.to_radians();
    rot.termination.upsilon = a.upsilon.unwrap_or(rot.termination.upsilon);
    rot.termination.tau = a.tau.unwrap_or(rot.termination.tau);
    rot.max_samples = a.max_samples.unwrap_or(rot.max_samples);
    rot.validate()?;
    let reg = &mut settings.registration;
    reg.alpha_mult = [a.alpha_mult1, a.alpha_mult2];
    reg.beta_mult = [a.beta_mult1, a.beta_mult2];
    reg.gamma = a.gamma.to_radians();
    reg.termination.upsilon = a.upsilon.unwrap_or(reg.termination.upsilon);
    reg.termination.tau = a.tau.unwrap_or(reg.termination.tau);
    reg.known_scale = a.known_scale.or(kind.known_scale());
    reg.max_samples = a.max_samples.unwrap_or(reg.max_samples);
    reg.validate()?;
    if matches!(solver, SolverSpec::Ransac { .. }) && a.max_samples.is_some() {
        log::info!("--max-samples ignored by RANSAC; use ransac:<cap>");
    }

    let est = solve(kind, &file.corr, solver, &settings, a.seed)?;
    // RANSAC's `terminated` means its adaptive bound was met; only RANSIC
    // has a budget to exhaust.
    let exhausted = solver == SolverSpec::Ransic && !est.terminated;

    let truth_path = a.truth.clone().or_else(|| {
        let p = truth_sidecar_path(&a.input);
        p.exists().then_some(p)
    });
    let truth = truth_path
        .map(|p| -> Result<GroundTruth> { read_truth(std::fs::File::open(p)?) })
        .transpose()?;

    let text = format_estimate(kind, &est);
    let record_to_stdout = a.out.as_deref().is_some_and(is_stdout);
    if record_to_stdout {
        eprint!("{text}");
    } else {
        print!("{text}");
    }

    if let Some(out) = &a.out {
        let mut rec = ResultRecord {
            problem: kind.name().into(),
            solver: solver.to_string(),
            n: file.corr.len(),
            outlier_ratio: truth.as_ref().map_or(f64::NAN, |t| t.outlier_ratio),
            seed: a.seed,
            rot_err_deg: None,
            scale_err: None,
            trans_err: None,
            recall: None,
            precision: None,
            samples_drawn: est.samples_drawn,
            wall_time_ms: 0.0,
            terminated: est.terminated,
        };
        if let Some(gt) = &truth {
            let m = metrics(kind, &gt.transform()?, &est, file.mask.as_deref());
            rec.rot_err_deg = m.rot_err_deg;
            rec.scale_err = m.scale_err;
            rec.trans_err = m.trans_err;
            rec.recall = m.recall;
            rec.precision = m.precision;
        }
        let mut w = open_out(out)?;
        write_results(&mut w, &[rec], a.format.into())?;
        w.flush()?;
    }

    if exhausted {
        eprintln!("error: sample budget exhausted after {} samples", est.samples_drawn);
        return Ok(3);
    }
    Ok(0)
}

fn cmd_bench(a: BenchArgs) -> Result<i32> {
    let solvers = a.solvers.iter().map(|s| s.parse()).collect::<Result<Vec<SolverSpec>>>()?;
    let mut settings = SolverSettings::with_sigma(a.sigma);
    if let Some(m) = a.max_samples {
        settings.rotation.max_samples = m;
        settings.registration.max_samples = m;
    }
    let plan = BenchPlan {
        base_seed: a.seed,
        sigma: a.sigma,
        solvers,
        settings,
        jobs: a.jobs,
        record_timing: !a.no_timing,
        ..BenchPlan::new(a.problem.into(), a.n, a.ratios, a.runs)
    };
    let records = run_bench(&plan)?;
    let mut w = open_out(&a.out)?;
    write_results(&mut w, &records, a.format.into())?;
    w.flush()?;
    let summary = summarize(&records, &SuccessCriteria::default());
    match &a.summary {
        Some(p) => {
            let mut w = open_out(p)?;
            write_summary(&mut w, &summary)?;
            w.flush()?;
        }
        None => {
            for s in &summary {
                eprintln!(
                    "{} {} n={} ratio={} success={:.2} median_rot={:?}",
                    s.problem, s.solver, s.n, s.outlier_ratio, s.success_rate, s.median_rot_err_deg
                );
            }
        }
    }
    Ok(0)
}
