//! Fixed-size 3D geometry: rotations, geodesic distance and the closed-form
//! alignment solvers used by every estimator in the crate.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};

use crate::error::{RansicError, Result};

pub type Vec3 = Vector3<f64>;

/// Relative tolerance under which a set of directions is treated as rank < 2.
pub const PARALLEL_TOL: f64 = 1e-6;

const MIN_NORM: f64 = 1e-12;

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps `m` after checking orthonormality and determinant to 1e-9.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let err = (m.transpose() * m - Matrix3::identity()).amax();
        if !err.is_finite() || err > 1e-9 || (m.determinant() - 1.0).abs() > 1e-9 {
            return Err(RansicError::InvalidParam(
                "matrix is not a proper rotation".into(),
            ));
        }
        Ok(Self(m))
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let q = UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self(q.to_rotation_matrix().into_inner())
    }

    /// Builds a rotation from (possibly unnormalized) quaternion components.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        Self(q.to_rotation_matrix().into_inner())
    }

    /// Row-major rotation from nine entries, validated.
    pub fn from_row_slice(entries: &[f64]) -> Result<Self> {
        if entries.len() != 9 {
            return Err(RansicError::InvalidParam(format!(
                "rotation needs 9 entries, got {}",
                entries.len()
            )));
        }
        Self::from_matrix(Matrix3::from_row_slice(entries))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Row-major entries.
    pub fn to_row_array(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn angle(&self) -> f64 {
        geodesic_distance(&Self::identity(), self)
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Similarity transform `q = s * R * p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimTransform {
    pub scale: f64,
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl SimTransform {
    pub fn new(scale: f64, rotation: Rotation, translation: Vec3) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(RansicError::InvalidParam(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * self.rotation.apply(p) + self.translation
    }
}

/// Angle of the relative rotation `r1ᵀ r2`, in `[0, π]`.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    let rel = r1.0.transpose() * r2.0;
    let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos loses half the digits near 0; the skew part carries sin θ.
    let skew = Vec3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]);
    (skew.norm() / 2.0).atan2(c)
}

/// True when every non-negligible vector in `vs` is parallel to the longest one
/// within the relative tolerance `tol` (i.e. the set has rank < 2).
pub fn is_colinear(vs: &[Vec3], tol: f64) -> bool {
    let Some(longest) = vs.iter().max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
    else {
        return true;
    };
    let ln = longest.norm();
    if ln <= MIN_NORM {
        return true;
    }
    !vs.iter().any(|v| {
        let n = v.norm();
        n > MIN_NORM && longest.cross(v).norm() >= tol * ln * n
    })
}

/// Least-squares rotation aligning `a_i` onto `b_i` via the SVD of the
/// cross-covariance, with reflection correction.
pub fn solve_rotation_svd(pairs: &[(Vec3, Vec3)]) -> Result<Rotation> {
    if pairs.len() < 2 {
        return Err(RansicError::DegenerateInput(format!(
            "rotation solve needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let sources: Vec<Vec3> = pairs.iter().map(|(a, _)| *a).collect();
    if is_colinear(&sources, PARALLEL_TOL) {
        return Err(RansicError::DegenerateInput(
            "source vectors span fewer than 2 dimensions".into(),
        ));
    }
    let h: Matrix3<f64> = pairs
        .iter()
        .fold(Matrix3::zeros(), |acc, (a, b)| acc + a * b.transpose());
    Ok(rotation_from_covariance(&h))
}

fn rotation_from_covariance(h: &Matrix3<f64>) -> Rotation {
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v = svd.v_t.expect("svd computed with v_t").transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        let (k, _) = svd.singular_values.argmin();
        let mut d = Matrix3::identity();
        d[(k, k)] = -1.0;
        r = v * d * u.transpose();
    }
    Rotation(r)
}

/// Weighted scale estimate `Σ w_i s_i / Σ w_i` with `w_i = ‖p̃_i‖² / α²`.
pub fn weighted_scale(demeaned_norms: &[f64], ratios: &[f64], alpha: f64) -> f64 {
    let (num, den) = demeaned_norms
        .iter()
        .zip(ratios)
        .fold((0.0, 0.0), |(num, den), (n, s)| {
            let w = n * n / (alpha * alpha);
            (num + w * s, den + w)
        });
    num / den
}

/// Centroids of both sides and the demeaned vectors.
pub(crate) fn demean(pairs: &[(Vec3, Vec3)]) -> (Vec3, Vec3, Vec<(Vec3, Vec3)>) {
    let n = pairs.len() as f64;
    let (sp, sq) = pairs
        .iter()
        .fold((Vec3::zeros(), Vec3::zeros()), |(sp, sq), (p, q)| (sp + p, sq + q));
    let (pc, qc) = (sp / n, sq / n);
    let demeaned = pairs.iter().map(|(p, q)| (p - pc, q - qc)).collect();
    (pc, qc, demeaned)
}

/// Similarity transform from three or more non-colinear point pairs.
///
/// Centroids remove the translation; the scale comes from the norm-weighted
/// ratio estimator (or `known_scale` verbatim); the rotation from the SVD of
/// the demeaned pairs; and finally `t = q̄ − s R p̄`.
pub fn solve_sim_transform(
    pairs: &[(Vec3, Vec3)],
    known_scale: Option<f64>,
) -> Result<SimTransform> {
    if pairs.len() < 3 {
        return Err(RansicError::DegenerateInput(format!(
            "similarity solve needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    let (pc, qc, demeaned) = demean(pairs);
    let sources: Vec<Vec3> = demeaned.iter().map(|(p, _)| *p).collect();
    if is_colinear(&sources, PARALLEL_TOL) {
        return Err(RansicError::DegenerateInput("colinear source points".into()));
    }
    let scale = match known_scale {
        Some(s) => s,
        None => {
            // alpha cancels in the weighted mean; points at the centroid carry zero weight
            let (norms, ratios): (Vec<f64>, Vec<f64>) = demeaned
                .iter()
                .filter(|(p, _)| p.norm() > MIN_NORM)
                .map(|(p, q)| (p.norm(), q.norm() / p.norm()))
                .unzip();
            weighted_scale(&norms, &ratios, 1.0)
        }
    };
    let rotation = solve_rotation_svd(&demeaned)?;
    let translation = qc - scale * rotation.apply(&pc);
    SimTransform::new(scale, rotation, translation)
}
