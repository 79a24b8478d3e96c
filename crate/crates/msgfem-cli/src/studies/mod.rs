//! The six experiment drivers. Each returns a [`StudyResult`] whose checks
//! carry the study's post-conditions as pass/fail rows.

mod contrast_sweep;
mod eigen_decay;
mod hat_width;
mod mesh_study;
mod oversampled_compare;
mod solve;

pub use contrast_sweep::run_contrast_sweep;
pub use eigen_decay::run_eigen_decay;
pub use hat_width::run_hat_width;
pub use mesh_study::run_mesh_study;
pub use oversampled_compare::run_oversampled_compare;
pub use solve::run_solve;

use crate::emit::StudyResult;
use std::time::Instant;

/// Squared relative errors below this are dominated by the rounding error of
/// the reference solve, so orthogonality ratios there are not checked.
pub const GALERKIN_ERROR_FLOOR: f64 = 1e-8;

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Adjacent pairs where the sequence goes up.
pub fn inversions(seq: &[f64]) -> usize {
    seq.windows(2).filter(|w| w[1] > w[0]).count()
}

pub(crate) struct Clock(Instant);

impl Clock {
    pub fn start() -> Self {
        Self(Instant::now())
    }

    pub fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub(crate) fn new_result(study: &str, hash: &str) -> StudyResult {
    StudyResult::new(study, hash)
}
