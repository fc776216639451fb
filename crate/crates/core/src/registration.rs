//! RANSIC for point cloud registration with unknown or known scale.
//!
//! Vertices are non-colinear 3-point sets whose per-point scale ratios and
//! per-point translations agree within the noise bounds. Two vertices share an
//! edge when their rotations agree within `gamma` and the merged point set
//! still satisfies the pairwise scale and translation bounds. The search runs
//! in up to two rounds; the second uses stricter bounds and starts from an
//! empty graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::consensus::{
    extract_inliers, termination_check, CompatGraph, CorrespondenceSet, TerminationParams,
};
use crate::error::{RansicError, Result};
use crate::geom::{demean, geodesic_distance, is_colinear, solve_sim_transform, SimTransform, Vec3};
use crate::rotation_search::{draw_distinct, refine};

/// Relative cross-product tolerance under which a sampled triple is colinear.
pub const TRIPLE_COLINEAR_TOL: f64 = 1e-3;

const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationConfig {
    /// Scale-test noise bound per round, in multiples of sigma.
    pub alpha_mult: [f64; 2],
    /// Translation-test noise bound per round, in multiples of sigma.
    pub beta_mult: [f64; 2],
    /// Rotation agreement bound between vertices (radians).
    pub gamma: f64,
    pub termination: TerminationParams,
    pub known_scale: Option<f64>,
    pub k_init: usize,
    pub itr1_k_break: usize,
    pub itr1_graph_break: usize,
    /// Sample cap for each round.
    pub max_samples: u64,
    pub seed: u64,
}

impl Default for RegistrationConfig {
    /// γ = 10°, υ = 3.2, τ = 9, α = (3.6σ, 3.2σ), β = (5.4σ, 4.8σ), σ = 0.01.
    fn default() -> Self {
        Self {
            alpha_mult: [3.6, 3.2],
            beta_mult: [5.4, 4.8],
            gamma: 10f64.to_radians(),
            termination: TerminationParams {
                upsilon: 3.2,
                tau: 9,
                sigma: 0.01,
            },
            known_scale: None,
            k_init: 1,
            itr1_k_break: 3,
            itr1_graph_break: 500,
            max_samples: 10_000_000,
            seed: 0,
        }
    }
}

/// Absolute noise bounds for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RegistrationConfig {
    pub fn bounds(&self, round: usize) -> Bounds {
        let sigma = self.termination.sigma;
        Bounds {
            alpha: self.alpha_mult[round] * sigma,
            beta: self.beta_mult[round] * sigma,
            gamma: self.gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.termination.validate()?;
        let mults_ok = self
            .alpha_mult
            .iter()
            .chain(&self.beta_mult)
            .all(|m| *m > 0.0 && m.is_finite());
        if !mults_ok {
            return Err(RansicError::InvalidParam("alpha/beta multipliers must be > 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < std::f64::consts::PI) {
            return Err(RansicError::InvalidParam(format!(
                "gamma must lie in (0, pi), got {}",
                self.gamma
            )));
        }
        if let Some(s) = self.known_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(RansicError::InvalidParam(format!("known scale must be > 0, got {s}")));
            }
        }
        if self.k_init < 1 || self.max_samples < 1 {
            return Err(RansicError::InvalidParam("k_init and max_samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub transform: SimTransform,
    pub inliers: Vec<usize>,
    pub samples_drawn: [u64; 2],
    /// Round in which the search stopped (1 or 2).
    pub iteration_used: u8,
    pub terminated: bool,
    pub vertices_created: usize,
}

impl RegistrationResult {
    pub fn total_samples(&self) -> u64 {
        self.samples_drawn.iter().sum()
    }

    pub fn ensure_terminated(self) -> Result<Self> {
        if self.terminated {
            Ok(self)
        } else {
            Err(RansicError::SampleBudgetExhausted {
                samples: self.total_samples(),
            })
        }
    }
}

/// Local model of a 3-point set plus the per-point translations `t_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriModel {
    pub transform: SimTransform,
    pub translations: [Vec3; 3],
}

/// A sampled 3-point set with its demeaned geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct TriSample {
    pub indices: [usize; 3],
    pub points: [(Vec3, Vec3); 3],
    pub demeaned: [(Vec3, Vec3); 3],
    /// `‖p̃_i‖`
    pub norms: [f64; 3],
    /// `s_i = ‖q̃_i‖ / ‖p̃_i‖`
    pub ratios: [f64; 3],
    pub model: Option<TriModel>,
}

impl TriSample {
    pub fn new(corr: &CorrespondenceSet, indices: [usize; 3]) -> Result<Self> {
        Self::from_points(indices, indices.map(|i| *corr.get(i)))
    }

    pub fn from_points(indices: [usize; 3], points: [(Vec3, Vec3); 3]) -> Result<Self> {
        let (_, _, d) = demean(&points);
        let demeaned = [d[0], d[1], d[2]];
        let sources = demeaned.map(|(p, _)| p);
        if is_colinear(&sources, TRIPLE_COLINEAR_TOL) {
            return Err(RansicError::DegenerateInput("colinear triple".into()));
        }
        let norms = sources.map(|p| p.norm());
        if norms.iter().any(|n| !(*n > MIN_NORM)) {
            return Err(RansicError::ZeroVector);
        }
        let ratios = std::array::from_fn(|i| demeaned[i].1.norm() / norms[i]);
        Ok(Self {
            indices,
            points,
            demeaned,
            norms,
            ratios,
            model: None,
        })
    }

    /// Solves and caches `(s*, R*, t*)` and the per-point `t_i`.
    pub fn solve(&mut self, known_scale: Option<f64>) -> Result<&TriModel> {
        if self.model.is_none() {
            let transform = solve_sim_transform(&self.points, known_scale)?;
            let translations = self.points.map(|(p, q)| per_point_translation(&transform, &p, &q));
            self.model = Some(TriModel {
                transform,
                translations,
            });
        }
        Ok(self.model.as_ref().expect("model just solved"))
    }
}

fn per_point_translation(t: &SimTransform, p: &Vec3, q: &Vec3) -> Vec3 {
    q - t.scale * t.rotation.apply(p)
}

/// `|s_i − s_j| <= α (1/‖p̃_i‖ + 1/‖p̃_j‖)`
pub fn scale_pair_ok(si: f64, sj: f64, ni: f64, nj: f64, alpha: f64) -> bool {
    (si - sj).abs() <= alpha * (1.0 / ni + 1.0 / nj)
}

/// `‖t_i − t_j‖ <= 2β`
pub fn translation_pair_ok(ti: &Vec3, tj: &Vec3, beta: f64) -> bool {
    (ti - tj).norm() <= 2.0 * beta
}

fn all_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b)))
}

/// Scale invariant of a 3-point set, plus `|s_i − s| <= α/‖p̃_i‖` when the
/// scale is known.
pub fn scale_compat(tri: &TriSample, alpha: f64, known_scale: Option<f64>) -> bool {
    let pairwise = all_pairs(3).all(|(i, j)| {
        scale_pair_ok(tri.ratios[i], tri.ratios[j], tri.norms[i], tri.norms[j], alpha)
    });
    pairwise
        && known_scale.is_none_or(|s| {
            (0..3).all(|i| (tri.ratios[i] - s).abs() <= alpha / tri.norms[i])
        })
}

/// Translation invariant of a 3-point set. Solves the local model on first use.
pub fn translation_compat(tri: &mut TriSample, beta: f64, known_scale: Option<f64>) -> Result<bool> {
    let model = tri.solve(known_scale)?;
    let ts = &model.translations;
    Ok(all_pairs(3).all(|(i, j)| translation_pair_ok(&ts[i], &ts[j], beta)))
}

/// Edge test between two solved 3-point sets.
///
/// Checks rotation agreement, then merges both sets (shared indices once,
/// ordered by index so the test is symmetric) and re-checks the scale and
/// translation bounds over every pair of the merged points, with `(s, R)`
/// re-estimated from the merged set.
pub fn six_point_edge(
    v1: &TriSample,
    v2: &TriSample,
    bounds: &Bounds,
    known_scale: Option<f64>,
) -> bool {
    let (Some(m1), Some(m2)) = (&v1.model, &v2.model) else {
        return false;
    };
    if geodesic_distance(&m1.transform.rotation, &m2.transform.rotation) > bounds.gamma {
        return false;
    }
    let mut merged: Vec<(usize, (Vec3, Vec3))> = v1
        .indices
        .iter()
        .zip(&v1.points)
        .chain(v2.indices.iter().zip(&v2.points))
        .map(|(&i, p)| (i, *p))
        .collect();
    merged.sort_by_key(|(i, _)| *i);
    merged.dedup_by_key(|(i, _)| *i);
    let points: Vec<(Vec3, Vec3)> = merged.into_iter().map(|(_, p)| p).collect();

    let (_, _, demeaned) = demean(&points);
    let norms: Vec<f64> = demeaned.iter().map(|(p, _)| p.norm()).collect();
    if norms.iter().any(|n| !(*n > MIN_NORM)) {
        return false;
    }
    let ratios: Vec<f64> = demeaned.iter().zip(&norms).map(|((_, q), n)| q.norm() / n).collect();
    let n = points.len();
    let scale_ok = all_pairs(n)
        .all(|(a, b)| scale_pair_ok(ratios[a], ratios[b], norms[a], norms[b], bounds.alpha));
    if !scale_ok {
        return false;
    }
    let Ok(merged_model) = solve_sim_transform(&points, known_scale) else {
        return false;
    };
    let ts: Vec<Vec3> = points
        .iter()
        .map(|(p, q)| per_point_translation(&merged_model, p, q))
        .collect();
    all_pairs(n).all(|(a, b)| translation_pair_ok(&ts[a], &ts[b], bounds.beta))
}

/// `‖s R p_i + t − q_i‖` for every correspondence.
pub fn registration_residuals(corr: &CorrespondenceSet, t: &SimTransform) -> Vec<f64> {
    corr.pairs().iter().map(|(p, q)| (t.apply(p) - q).norm()).collect()
}

pub fn run_registration(
    corr: &CorrespondenceSet,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    let n = corr.len();
    if n < 3 {
        return Err(RansicError::DegenerateInput(format!(
            "registration needs at least 3 correspondences, got {n}"
        )));
    }
    let known = cfg.known_scale;
    let sigma = cfg.termination.sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut graph: CompatGraph<TriSample> = CompatGraph::new();
    let mut samples = [0u64; 2];
    let mut iteration_used = 1u8;
    let mut vertices_created = 0usize;
    let mut best: Option<(usize, SimTransform)> = None;
    let mut accepted: Option<SimTransform> = None;

    for round in 0..2 {
        let bounds = cfg.bounds(round);
        let mut k = cfg.k_init;
        graph.clear();
        iteration_used = round as u8 + 1;
        while samples[round] < cfg.max_samples {
            samples[round] += 1;
            let idx = draw_distinct::<3>(&mut rng, n);
            if graph.contains(&idx) {
                continue;
            }
            let Ok(mut tri) = TriSample::new(corr, idx) else {
                continue;
            };
            if !scale_compat(&tri, bounds.alpha, known) {
                continue;
            }
            if !matches!(translation_compat(&mut tri, bounds.beta, known), Ok(true)) {
                continue;
            }
            let Some(id) = graph.insert(idx.to_vec(), tri) else {
                continue;
            };
            vertices_created += 1;
            let ys = graph.neighbors(id, |v, u| six_point_edge(&v.model, &u.model, &bounds, known));
            if ys.len() - 1 < k {
                continue;
            }
            let support = graph.union_indices(&ys);
            if let Ok(t) = solve_sim_transform(&corr.select(&support), known) {
                let res = registration_residuals(corr, &t);
                let gated = extract_inliers(&res, sigma).len();
                if best.is_none_or(|(c, _)| gated > c) {
                    best = Some((gated, t));
                }
                if termination_check(&res, &cfg.termination) {
                    accepted = Some(t);
                    break;
                }
            }
            if round == 0 && (k >= cfg.itr1_k_break || graph.len() >= cfg.itr1_graph_break) {
                log::debug!("escalating to round 2 at K = {k}, |X| = {}", graph.len());
                break;
            }
            k += 1;
        }
        if accepted.is_some() {
            break;
        }
    }

    let terminated = accepted.is_some();
    if !terminated {
        log::info!("registration exhausted its sample budget ({samples:?}) without termination");
    }
    let start = accepted.or(best.map(|(_, t)| t));
    let (transform, inliers) = match start {
        Some(t) => refine(
            t,
            sigma,
            3,
            |t| registration_residuals(corr, t),
            |idx| solve_sim_transform(&corr.select(idx), known),
        ),
        None => (
            SimTransform {
                scale: known.unwrap_or(1.0),
                ..SimTransform::identity()
            },
            Vec::new(),
        ),
    };
    Ok(RegistrationResult {
        transform,
        inliers,
        samples_drawn: samples,
        iteration_used,
        terminated,
        vertices_created,
    })
}
