//! Monte-Carlo sweeps: problem generation, solver dispatch, per-run metrics
//! and per-cell aggregates.
//!
//! Each run's instance seed is `cell_seed(base, problem, n, ratio, run)`, a
//! SplitMix64 chain over those five words (the ratio enters as its IEEE-754
//! bits). Solver seeds hash the instance seed with the solver name, so every
//! solver sees the same instances and adding a solver or a ratio never
//! changes another cell.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{ransac_registration, ransac_rotation, RansacConfig};
use crate::error::{RansicError, Result};
use crate::geom::{geodesic_distance, SimTransform};
use crate::io::{round_sig9, ResultRecord};
use crate::registration::{run_registration, RegistrationConfig};
use crate::rotation_search::{run_rotation_search, RotationSearchConfig};
use crate::synth::{gen_registration_problem, gen_rotation_problem, ScaleMode};
use crate::CorrespondenceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Rotation,
    Register,
    RegisterKnownScale,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rotation => "rotation",
            Self::Register => "register",
            Self::RegisterKnownScale => "register-known-scale",
        }
    }

    fn id(self) -> u64 {
        match self {
            Self::Rotation => 1,
            Self::Register => 2,
            Self::RegisterKnownScale => 3,
        }
    }

    pub fn known_scale(self) -> Option<f64> {
        (self == Self::RegisterKnownScale).then_some(1.0)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = RansicError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(Self::Rotation),
            "register" => Ok(Self::Register),
            "register-known-scale" => Ok(Self::RegisterKnownScale),
            other => Err(RansicError::InvalidParam(format!("unknown problem kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverSpec {
    Ransic,
    Ransac { max_iterations: u64 },
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ransic => f.write_str("ransic"),
            Self::Ransac { max_iterations } => write!(f, "ransac:{max_iterations}"),
        }
    }
}

impl FromStr for SolverSpec {
    type Err = RansicError;

    /// `ransic`, `ransac` (1000 iterations) or `ransac:<max_iterations>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "ransic" => Ok(Self::Ransic),
            None if s == "ransac" => Ok(Self::Ransac {
                max_iterations: 1000,
            }),
            Some(("ransac", cap)) => cap
                .parse()
                .ok()
                .filter(|c| *c > 0)
                .map(|max_iterations| Self::Ransac { max_iterations })
                .ok_or_else(|| RansicError::InvalidParam(format!("bad RANSAC cap {cap:?}"))),
            _ => Err(RansicError::InvalidParam(format!("unknown solver {s:?}"))),
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0, |h, &w| splitmix64(h ^ w))
}

pub fn cell_seed(base: u64, problem: ProblemKind, n: usize, ratio: f64, run: usize) -> u64 {
    hash_words(&[base, problem.id(), n as u64, ratio.to_bits(), run as u64])
}

pub fn solver_seed(instance_seed: u64, solver: SolverSpec) -> u64 {
    let name = solver.to_string();
    let words: Vec<u64> = std::iter::once(instance_seed)
        .chain(name.bytes().map(u64::from))
        .collect();
    hash_words(&words)
}

/// A generated instance with its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub kind: ProblemKind,
    pub corr: CorrespondenceSet,
    pub truth: SimTransform,
    pub mask: Vec<bool>,
}

pub fn generate(kind: ProblemKind, n: usize, ratio: f64, sigma: f64, seed: u64) -> Result<Instance> {
    Ok(match kind {
        ProblemKind::Rotation => {
            let p = gen_rotation_problem(n, ratio, sigma, seed)?;
            Instance {
                kind,
                corr: p.corr,
                truth: SimTransform {
                    rotation: p.truth,
                    ..SimTransform::identity()
                },
                mask: p.inlier_mask,
            }
        }
        ProblemKind::Register | ProblemKind::RegisterKnownScale => {
            let mode = if kind == ProblemKind::Register {
                ScaleMode::Unknown
            } else {
                ScaleMode::Known
            };
            let p = gen_registration_problem(n, ratio, sigma, mode, seed)?;
            Instance {
                kind,
                corr: p.corr,
                truth: p.truth,
                mask: p.inlier_mask,
            }
        }
    })
}

/// Solver output normalised across problem kinds (rotation problems carry
/// unit scale and zero translation).
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub transform: SimTransform,
    pub inliers: Vec<usize>,
    pub samples_drawn: u64,
    pub iteration_used: u8,
    pub terminated: bool,
}

/// Per-kind solver settings. Seeds inside are overwritten per run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSettings {
    pub rotation: RotationSearchConfig,
    pub registration: RegistrationConfig,
}

impl SolverSettings {
    pub fn with_sigma(sigma: f64) -> Self {
        let mut s = Self::default();
        s.rotation.termination.sigma = sigma;
        s.registration.termination.sigma = sigma;
        s
    }

    fn sigma(&self, kind: ProblemKind) -> f64 {
        match kind {
            ProblemKind::Rotation => self.rotation.termination.sigma,
            _ => self.registration.termination.sigma,
        }
    }
}

pub fn solve(
    kind: ProblemKind,
    corr: &CorrespondenceSet,
    solver: SolverSpec,
    settings: &SolverSettings,
    seed: u64,
) -> Result<Estimate> {
    let sigma = settings.sigma(kind);
    match (kind, solver) {
        (ProblemKind::Rotation, SolverSpec::Ransic) => {
            let cfg = RotationSearchConfig {
                seed,
                ..settings.rotation.clone()
            };
            let r = run_rotation_search(corr, &cfg)?;
            Ok(Estimate {
                transform: SimTransform {
                    rotation: r.rotation,
                    ..SimTransform::identity()
                },
                inliers: r.inliers,
                samples_drawn: r.samples_drawn,
                iteration_used: 1,
                terminated: r.terminated,
            })
        }
        (ProblemKind::Rotation, SolverSpec::Ransac { max_iterations }) => {
            let cfg = RansacConfig {
                seed,
                ..RansacConfig::for_sigma(sigma, max_iterations)
            };
            let r = ransac_rotation(corr, &cfg)?;
            Ok(Estimate {
                transform: SimTransform {
                    rotation: r.rotation,
                    ..SimTransform::identity()
                },
                inliers: r.inliers,
                samples_drawn: r.samples_drawn,
                iteration_used: 1,
                terminated: r.terminated,
            })
        }
        (_, SolverSpec::Ransic) => {
            let cfg = RegistrationConfig {
                seed,
                known_scale: settings.registration.known_scale.or(kind.known_scale()),
                ..settings.registration.clone()
            };
            let r = run_registration(corr, &cfg)?;
            Ok(Estimate {
                transform: r.transform,
                samples_drawn: r.total_samples(),
                inliers: r.inliers,
                iteration_used: r.iteration_used,
                terminated: r.terminated,
            })
        }
        (_, SolverSpec::Ransac { max_iterations }) => {
            let cfg = RansacConfig {
                seed,
                ..RansacConfig::for_sigma(sigma, max_iterations)
            };
            let known = settings.registration.known_scale.or(kind.known_scale());
            let r = ransac_registration(corr, &cfg, known)?;
            Ok(Estimate {
                transform: r.transform,
                samples_drawn: r.total_samples(),
                inliers: r.inliers,
                iteration_used: 1,
                terminated: r.terminated,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub rot_err_deg: Option<f64>,
    pub scale_err: Option<f64>,
    pub trans_err: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
}

/// `(recall, precision)` of `returned` against a ground-truth mask.
/// Precision of an empty selection is 0.
pub fn recall_precision(returned: &[usize], mask: &[bool]) -> (f64, f64) {
    let truth = mask.iter().filter(|&&m| m).count();
    let hits = returned.iter().filter(|&&i| mask.get(i).copied().unwrap_or(false)).count();
    let recall = if truth == 0 { 1.0 } else { hits as f64 / truth as f64 };
    let precision = if returned.is_empty() {
        0.0
    } else {
        hits as f64 / returned.len() as f64
    };
    (recall, precision)
}

pub fn metrics(kind: ProblemKind, truth: &SimTransform, est: &Estimate, mask: Option<&[bool]>) -> Metrics {
    let (recall, precision) = match mask {
        Some(m) => {
            let (r, p) = recall_precision(&est.inliers, m);
            (Some(r), Some(p))
        }
        None => (None, None),
    };
    let registration = kind != ProblemKind::Rotation;
    Metrics {
        rot_err_deg: Some(geodesic_distance(&truth.rotation, &est.transform.rotation).to_degrees()),
        scale_err: registration.then(|| (est.transform.scale - truth.scale).abs()),
        trans_err: registration.then(|| (est.transform.translation - truth.translation).norm()),
        recall,
        precision,
    }
}

/// Thresholds deciding whether a run counts as a success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessCriteria {
    pub max_rot_err_deg: f64,
    pub max_scale_err: f64,
    pub max_trans_err: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self {
            max_rot_err_deg: 5.0,
            max_scale_err: 0.1,
            max_trans_err: 0.1,
        }
    }
}

impl SuccessCriteria {
    pub fn is_success(&self, r: &ResultRecord) -> bool {
        let within = |v: Option<f64>, max: f64| v.is_none_or(|v| v < max);
        r.rot_err_deg.is_some_and(|e| e < self.max_rot_err_deg)
            && within(r.scale_err, self.max_scale_err)
            && within(r.trans_err, self.max_trans_err)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub problem: ProblemKind,
    pub ns: Vec<usize>,
    pub ratios: Vec<f64>,
    pub runs: usize,
    pub base_seed: u64,
    pub sigma: f64,
    pub solvers: Vec<SolverSpec>,
    pub settings: SolverSettings,
    pub jobs: usize,
    /// When false, `wall_time_ms` is written as 0 so output is reproducible
    /// byte for byte.
    pub record_timing: bool,
}

impl BenchPlan {
    pub fn new(problem: ProblemKind, ns: Vec<usize>, ratios: Vec<f64>, runs: usize) -> Self {
        Self {
            problem,
            ns,
            ratios,
            runs,
            base_seed: 0,
            sigma: 0.01,
            solvers: vec![SolverSpec::Ransic],
            settings: SolverSettings::with_sigma(0.01),
            jobs: 1,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 || self.ns.is_empty() || self.ratios.is_empty() || self.solvers.is_empty() {
            return Err(RansicError::InvalidParam(
                "plan needs runs >= 1 and non-empty n, ratio and solver lists".into(),
            ));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(RansicError::InvalidParam(format!("ratio {r} outside [0, 1)")));
        }
        if !(self.sigma > 0.0) {
            return Err(RansicError::InvalidParam("sigma must be > 0".into()));
        }
        Ok(())
    }
}

/// Generates one instance and runs one solver on it. Failures are recorded
/// with `terminated = false` and no error metrics.
pub fn run_one(plan: &BenchPlan, n: usize, ratio: f64, run: usize, solver: SolverSpec) -> ResultRecord {
    let seed = cell_seed(plan.base_seed, plan.problem, n, ratio, run);
    let mut rec = ResultRecord {
        problem: plan.problem.name().into(),
        solver: solver.to_string(),
        n,
        outlier_ratio: ratio,
        seed,
        rot_err_deg: None,
        scale_err: None,
        trans_err: None,
        recall: None,
        precision: None,
        samples_drawn: 0,
        wall_time_ms: 0.0,
        terminated: false,
    };
    let inst = match generate(plan.problem, n, ratio, plan.sigma, seed) {
        Ok(i) => i,
        Err(e) => {
            log::warn!("instance generation failed for seed {seed}: {e}");
            return rec;
        }
    };
    let started = Instant::now();
    let est = solve(plan.problem, &inst.corr, solver, &plan.settings, solver_seed(seed, solver));
    let elapsed = started.elapsed().as_secs_f64() * 1e3;
    match est {
        Ok(est) => {
            let m = metrics(plan.problem, &inst.truth, &est, Some(&inst.mask));
            rec.rot_err_deg = m.rot_err_deg;
            rec.scale_err = m.scale_err;
            rec.trans_err = m.trans_err;
            rec.recall = m.recall;
            rec.precision = m.precision;
            rec.samples_drawn = est.samples_drawn;
            rec.terminated = est.terminated;
        }
        Err(e) => log::warn!("{solver} failed on seed {seed}: {e}"),
    }
    if plan.record_timing {
        rec.wall_time_ms = elapsed;
    }
    rec
}

/// All runs of the plan, ordered by (n, ratio, run, solver) regardless of
/// how many worker threads execute them.
pub fn run_bench(plan: &BenchPlan) -> Result<Vec<ResultRecord>> {
    plan.validate()?;
    let mut cells = Vec::new();
    for &n in &plan.ns {
        for &ratio in &plan.ratios {
            for run in 0..plan.runs {
                for &solver in &plan.solvers {
                    cells.push((n, ratio, run, solver));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs.max(1))
        .build()
        .map_err(|e| RansicError::InvalidParam(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, ratio, run, solver)| run_one(plan, n, ratio, run, solver))
            .collect()
    }))
}

/// Aggregate of one (problem, solver, n, ratio) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub problem: String,
    pub solver: String,
    pub n: usize,
    pub outlier_ratio: f64,
    pub runs: usize,
    pub success_rate: f64,
    pub terminated_rate: f64,
    pub median_rot_err_deg: Option<f64>,
    pub max_rot_err_deg: Option<f64>,
    pub median_scale_err: Option<f64>,
    pub max_scale_err: Option<f64>,
    pub median_trans_err: Option<f64>,
    pub max_trans_err: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_precision: Option<f64>,
    pub mean_wall_time_ms: f64,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Groups records by cell in first-appearance order.
pub fn summarize(records: &[ResultRecord], criteria: &SuccessCriteria) -> Vec<CellSummary> {
    let mut keys: Vec<(String, String, usize, u64)> = Vec::new();
    for r in records {
        let key = (r.problem.clone(), r.solver.clone(), r.n, r.outlier_ratio.to_bits());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(problem, solver, n, ratio_bits)| {
            let cell: Vec<&ResultRecord> = records
                .iter()
                .filter(|r| {
                    r.problem == problem && r.solver == solver && r.n == n && r.outlier_ratio.to_bits() == ratio_bits
                })
                .collect();
            let col = |f: fn(&ResultRecord) -> Option<f64>| -> Vec<f64> { cell.iter().filter_map(|r| f(r)).collect() };
            let max = |v: &[f64]| v.iter().copied().reduce(f64::max);
            let rot = col(|r| r.rot_err_deg);
            let scale = col(|r| r.scale_err);
            let trans = col(|r| r.trans_err);
            let runs = cell.len();
            CellSummary {
                problem,
                solver,
                n,
                outlier_ratio: f64::from_bits(ratio_bits),
                runs,
                success_rate: cell.iter().filter(|r| criteria.is_success(r)).count() as f64 / runs as f64,
                terminated_rate: cell.iter().filter(|r| r.terminated).count() as f64 / runs as f64,
                median_rot_err_deg: median(&rot),
                max_rot_err_deg: max(&rot),
                median_scale_err: median(&scale),
                max_scale_err: max(&scale),
                median_trans_err: median(&trans),
                max_trans_err: max(&trans),
                mean_recall: mean(&col(|r| r.recall)),
                mean_precision: mean(&col(|r| r.precision)),
                mean_wall_time_ms: mean(&cell.iter().map(|r| r.wall_time_ms).collect::<Vec<_>>()).unwrap_or(0.0),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(w: W, summaries: &[CellSummary]) -> Result<()> {
    let mut cw = csv::Writer::from_writer(w);
    for s in summaries {
        let r = |o: Option<f64>| o.map(round_sig9);
        cw.serialize(CellSummary {
            outlier_ratio: round_sig9(s.outlier_ratio),
            success_rate: round_sig9(s.success_rate),
            terminated_rate: round_sig9(s.terminated_rate),
            median_rot_err_deg: r(s.median_rot_err_deg),
            max_rot_err_deg: r(s.max_rot_err_deg),
            median_scale_err: r(s.median_scale_err),
            max_scale_err: r(s.max_scale_err),
            median_trans_err: r(s.median_trans_err),
            max_trans_err: r(s.max_trans_err),
            mean_recall: r(s.mean_recall),
            mean_precision: r(s.mean_precision),
            mean_wall_time_ms: round_sig9(s.mean_wall_time_ms),
            ..s.clone()
        })?;
    }
    cw.flush()?;
    Ok(())
}
