//! Classical RANSAC with the same closed-form solvers and the same `5.2σ`
//! residual gate, for head-to-head comparison.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::consensus::{CorrespondenceSet, INLIER_GATE};
use crate::error::{RansicError, Result};
use crate::geom::{solve_rotation_svd, solve_sim_transform, Rotation, SimTransform, Vec3};
use crate::registration::{registration_residuals, RegistrationResult};
use crate::rotation_search::{draw_distinct, rotation_residuals, unit_pairs, RotationSearchResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RansacConfig {
    pub confidence: f64,
    pub max_iterations: u64,
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl RansacConfig {
    /// 0.995 confidence, threshold `5.2σ`.
    pub fn for_sigma(sigma: f64, max_iterations: u64) -> Self {
        Self {
            confidence: 0.995,
            max_iterations,
            inlier_threshold: INLIER_GATE * sigma,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(RansicError::InvalidParam(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        if self.max_iterations < 1 || !(self.inlier_threshold > 0.0) {
            return Err(RansicError::InvalidParam(
                "max_iterations must be >= 1 and inlier_threshold > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Standard adaptive bound `log(1 − p) / log(1 − w^m)`.
pub fn required_iterations(confidence: f64, inlier_ratio: f64, sample_size: u32) -> f64 {
    let good = inlier_ratio.powi(sample_size as i32);
    if good >= 1.0 {
        return 0.0;
    }
    if good <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - confidence).ln() / (1.0 - good).ln()
}

struct Outcome<M> {
    model: M,
    inliers: Vec<usize>,
    iterations: u64,
    converged: bool,
}

fn ransac_loop<M: Clone, const S: usize>(
    n: usize,
    cfg: &RansacConfig,
    fit: impl Fn(&[usize]) -> Result<M>,
    residuals: impl Fn(&M) -> Vec<f64>,
) -> Option<Outcome<M>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(M, Vec<usize>)> = None;
    let mut bound = f64::INFINITY;
    let mut iterations = 0u64;
    while iterations < cfg.max_iterations && (iterations as f64) < bound {
        iterations += 1;
        let sample = draw_distinct::<S>(&mut rng, n);
        let Ok(model) = fit(&sample) else { continue };
        let consensus: Vec<usize> = residuals(&model)
            .iter()
            .enumerate()
            .filter(|&(_, &r)| r <= cfg.inlier_threshold)
            .map(|(i, _)| i)
            .collect();
        if best.as_ref().is_none_or(|(_, b)| consensus.len() > b.len()) {
            let w = consensus.len() as f64 / n as f64;
            bound = required_iterations(cfg.confidence, w, S as u32);
            best = Some((model, consensus));
        }
    }
    let converged = (iterations as f64) >= bound;
    best.map(|(model, inliers)| Outcome {
        model,
        inliers,
        iterations,
        converged,
    })
}

pub fn ransac_rotation(corr: &CorrespondenceSet, cfg: &RansacConfig) -> Result<RotationSearchResult> {
    cfg.validate()?;
    if corr.len() < 2 {
        return Err(RansicError::DegenerateInput("RANSAC rotation needs >= 2 pairs".into()));
    }
    let unit = unit_pairs(corr)?;
    let pick = |idx: &[usize]| -> Vec<(Vec3, Vec3)> { idx.iter().map(|&i| unit[i]).collect() };
    let outcome = ransac_loop::<Rotation, 2>(
        corr.len(),
        cfg,
        |s| solve_rotation_svd(&pick(s)),
        |r| rotation_residuals(&unit, r),
    );
    Ok(match outcome {
        Some(o) => RotationSearchResult {
            rotation: solve_rotation_svd(&pick(&o.inliers)).unwrap_or(o.model),
            inliers: o.inliers,
            samples_drawn: o.iterations,
            vertices_created: 0,
            terminated: o.converged,
            final_k: 0,
        },
        None => RotationSearchResult {
            rotation: Rotation::identity(),
            inliers: Vec::new(),
            samples_drawn: cfg.max_iterations,
            vertices_created: 0,
            terminated: false,
            final_k: 0,
        },
    })
}

pub fn ransac_registration(
    corr: &CorrespondenceSet,
    cfg: &RansacConfig,
    known_scale: Option<f64>,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    if corr.len() < 3 {
        return Err(RansicError::DegenerateInput("RANSAC registration needs >= 3 pairs".into()));
    }
    let outcome = ransac_loop::<SimTransform, 3>(
        corr.len(),
        cfg,
        |s| solve_sim_transform(&corr.select(s), known_scale),
        |t| registration_residuals(corr, t),
    );
    Ok(match outcome {
        Some(o) => RegistrationResult {
            transform: solve_sim_transform(&corr.select(&o.inliers), known_scale).unwrap_or(o.model),
            inliers: o.inliers,
            samples_drawn: [o.iterations, 0],
            iteration_used: 1,
            terminated: o.converged,
            vertices_created: 0,
        },
        None => RegistrationResult {
            transform: SimTransform {
                scale: known_scale.unwrap_or(1.0),
                ..SimTransform::identity()
            },
            inliers: Vec::new(),
            samples_drawn: [cfg.max_iterations, 0],
            iteration_used: 1,
            terminated: false,
            vertices_created: 0,
        },
    })
}
