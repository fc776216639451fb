//! Seeded synthetic problems with ground truth and inlier masks.
//!
//! Every generator seeds a `ChaCha8Rng` from the caller's seed and consumes it
//! in a fixed order, so output depends only on the arguments:
//!
//! - rotation problems: truth rotation (4 normals), `n` source directions
//!   (3 normals each), `n` noise triples, outlier placement (Fisher-Yates
//!   shuffle of `0..n`), then one fresh direction per outlier in ascending
//!   index order;
//! - registration problems: procedural cloud (`3n` uniforms, skipped for a
//!   supplied cloud), scale (one uniform, unknown-scale mode only), rotation,
//!   translation (3 normals + 1 uniform), `n` noise triples, outlier placement,
//!   then one point in the outlier ball per outlier in ascending index order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::consensus::CorrespondenceSet;
use crate::error::{RansicError, Result};
use crate::geom::{Rotation, SimTransform, Vec3};

/// Largest translation norm drawn for registration problems.
pub const MAX_TRANSLATION: f64 = 3.0;
pub const SCALE_RANGE: (f64, f64) = (1.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// Scale drawn uniformly from (1, 5).
    Unknown,
    /// Scale fixed to 1.
    Known,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudKind {
    Procedural,
    Loaded,
}

#[derive(Debug, Clone)]
pub struct RotationProblem {
    pub corr: CorrespondenceSet,
    pub truth: Rotation,
    pub inlier_mask: Vec<bool>,
    pub sigma: f64,
    pub outlier_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RegistrationProblem {
    pub corr: CorrespondenceSet,
    pub truth: SimTransform,
    pub inlier_mask: Vec<bool>,
    pub sigma: f64,
    pub outlier_ratio: f64,
    pub cloud_kind: CloudKind,
}

fn normal3(rng: &mut impl Rng) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Uniform direction on the unit sphere.
pub fn random_unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = normal3(rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Haar-uniform rotation from a normalised Gaussian quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Rotation {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if q.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
            return Rotation::from_quaternion(q[0], q[1], q[2], q[3]);
        }
    }
}

/// Uniform point inside the ball of the given radius around the origin.
pub fn uniform_in_ball(rng: &mut impl Rng, radius: f64) -> Vec3 {
    let dir = random_unit_vector(rng);
    let u: f64 = rng.random();
    dir * radius * u.cbrt()
}

/// Recentres and uniformly rescales `points` so their bounding box fits
/// `[-0.5, 0.5]³` with the longest side spanning it exactly.
pub fn fit_to_unit_box(points: &[Vec3]) -> Result<Vec<Vec3>> {
    let Some(first) = points.first() else {
        return Err(RansicError::InvalidParam("empty cloud".into()));
    };
    let (lo, hi) = points
        .iter()
        .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(RansicError::InvalidParam("cloud has zero extent".into()));
    }
    let center = (lo + hi) / 2.0;
    Ok(points.iter().map(|p| (p - center) / extent).collect())
}

fn check_ratio(outlier_ratio: f64) -> Result<()> {
    if !(0.0..1.0).contains(&outlier_ratio) {
        return Err(RansicError::InvalidParam(format!(
            "outlier ratio must lie in [0, 1), got {outlier_ratio}"
        )));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(RansicError::InvalidParam(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(())
}

/// Number of inliers for `n` correspondences at the given outlier ratio.
pub fn inlier_count(n: usize, outlier_ratio: f64) -> usize {
    ((n as f64) * (1.0 - outlier_ratio)).round() as usize
}

/// Marks `n - inliers` randomly placed indices as outliers.
fn outlier_mask(rng: &mut impl Rng, n: usize, inliers: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mask = vec![true; n];
    for &i in &order[..n - inliers] {
        mask[i] = false;
    }
    mask
}

pub fn gen_rotation_problem(
    n: usize,
    outlier_ratio: f64,
    sigma: f64,
    seed: u64,
) -> Result<RotationProblem> {
    if n < 2 {
        return Err(RansicError::InvalidParam(format!("n must be >= 2, got {n}")));
    }
    check_ratio(outlier_ratio)?;
    check_sigma(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = random_rotation(&mut rng);
    let sources: Vec<Vec3> = (0..n).map(|_| random_unit_vector(&mut rng)).collect();
    let noise: Vec<Vec3> = (0..n).map(|_| normal3(&mut rng) * sigma).collect();
    let mask = outlier_mask(&mut rng, n, inlier_count(n, outlier_ratio));
    let pairs = sources
        .iter()
        .zip(&noise)
        .zip(&mask)
        .map(|((a, e), &inlier)| {
            let b = if inlier {
                truth.apply(a) + e
            } else {
                random_unit_vector(&mut rng)
            };
            (*a, b)
        })
        .collect();
    Ok(RotationProblem {
        corr: CorrespondenceSet::new(pairs),
        truth,
        inlier_mask: mask,
        sigma,
        outlier_ratio,
    })
}

/// Registration problem on a procedural cloud: `n` uniform points rescaled
/// into `[-0.5, 0.5]³`.
pub fn gen_registration_problem(
    n: usize,
    outlier_ratio: f64,
    sigma: f64,
    scale_mode: ScaleMode,
    seed: u64,
) -> Result<RegistrationProblem> {
    if n < 3 {
        return Err(RansicError::InvalidParam(format!("n must be >= 3, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Vec3> = (0..n)
        .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
        .collect();
    let cloud = fit_to_unit_box(&raw)?;
    build_registration(&mut rng, &cloud, outlier_ratio, sigma, scale_mode, CloudKind::Procedural)
}

/// Registration problem on a caller-supplied cloud (e.g. loaded from PLY).
/// The cloud is fitted into `[-0.5, 0.5]³` first.
pub fn gen_registration_problem_from_cloud(
    cloud: &[Vec3],
    outlier_ratio: f64,
    sigma: f64,
    scale_mode: ScaleMode,
    seed: u64,
) -> Result<RegistrationProblem> {
    if cloud.len() < 3 {
        return Err(RansicError::InvalidParam(format!(
            "cloud needs at least 3 points, got {}",
            cloud.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = fit_to_unit_box(cloud)?;
    build_registration(&mut rng, &cloud, outlier_ratio, sigma, scale_mode, CloudKind::Loaded)
}

fn build_registration(
    rng: &mut ChaCha8Rng,
    cloud: &[Vec3],
    outlier_ratio: f64,
    sigma: f64,
    scale_mode: ScaleMode,
    cloud_kind: CloudKind,
) -> Result<RegistrationProblem> {
    check_ratio(outlier_ratio)?;
    check_sigma(sigma)?;
    let n = cloud.len();
    let scale = match scale_mode {
        ScaleMode::Unknown => loop {
            let s = rng.random_range(SCALE_RANGE.0..SCALE_RANGE.1);
            if s > SCALE_RANGE.0 {
                break s;
            }
        },
        ScaleMode::Known => 1.0,
    };
    let rotation = random_rotation(rng);
    let translation = uniform_in_ball(rng, MAX_TRANSLATION);
    let truth = SimTransform::new(scale, rotation, translation)?;
    let noise: Vec<Vec3> = (0..n).map(|_| normal3(rng) * sigma).collect();
    let mask = outlier_mask(rng, n, inlier_count(n, outlier_ratio));

    let centroid = cloud.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n as f64;
    let center = truth.apply(&centroid);
    let radius = scale * 3f64.sqrt() / 2.0;
    let pairs = cloud
        .iter()
        .zip(&noise)
        .zip(&mask)
        .map(|((p, e), &inlier)| {
            let q = if inlier {
                truth.apply(p) + e
            } else {
                center + uniform_in_ball(rng, radius)
            };
            (*p, q)
        })
        .collect();
    Ok(RegistrationProblem {
        corr: CorrespondenceSet::new(pairs),
        truth,
        inlier_mask: mask,
        sigma,
        outlier_ratio,
        cloud_kind,
    })
}
