//! Outlier-robust rotation search and point cloud registration by random
//! sampling with invariant compatibility (RANSIC).
//!
//! Random minimal subsets of the correspondences are screened by invariant
//! tests that hold for any inlier subset regardless of the unknown transform.
//! Survivors become vertices of a compatibility graph; once a new vertex has
//! enough compatible peers and the residuals of the model solved from them look
//! like pure noise, sampling stops and every correspondence within `5.2σ` of
//! that model is returned as an inlier.
//!
//! - [`rotation_search`]: vector correspondences, unknown rotation.
//! - [`registration`]: point correspondences, unknown (or known) scale,
//!   rotation and translation.
//! - [`baseline`]: classical RANSAC with the same closed-form solvers.
//! - [`synth`]: seeded synthetic problem generators with ground truth.
//! - [`io`], [`bench`]: file formats and the Monte-Carlo sweep harness.
//!
//! Correspondence indices are 0-based throughout.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
    }};
}

pub mod baseline;
pub mod bench;
pub mod cli;
pub mod consensus;
pub mod error;
pub mod geom;
pub mod io;
pub mod registration;
pub mod rotation_search;
pub mod synth;

pub use consensus::{CompatGraph, CorrespondenceSet, TerminationParams, Vertex, INLIER_GATE};
pub use error::{RansicError, Result};
pub use geom::{geodesic_distance, solve_rotation_svd, solve_sim_transform, Rotation, SimTransform, Vec3};
pub use registration::{run_registration, RegistrationConfig, RegistrationResult};
pub use rotation_search::{run_rotation_search, RotationSearchConfig, RotationSearchResult};
