//! Shrinkage covariance estimators whose inverses serve as precision matrices:
//! linear shrinkage toward a scaled identity, nonlinear eigenvalue shrinkage,
//! and nonlinear shrinkage after whitening by a single-factor covariance.
//!
//! All three expect demeaned returns (T×p).

mod linear;
mod nls;
mod sfnl;

pub use linear::{linear_shrinkage, LinearShrinkageDiagnostics};
pub use nls::{estimate_stieltjes, nls_shrinkage, NlsDiagnostics, MIN_NLS_PERIODS};
pub use sfnl::{sfnl_shrinkage, sfnl_with_target, single_factor_cov};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Column means must vanish relative to the data scale.
pub fn require_demeaned(y: &DMatrix<f64>) -> Result<()> {
    let means = linalg::column_means(y);
    let worst = means.amax();
    let scale = linalg::max_abs(y);
    if worst > 1e-8 * scale.max(f64::MIN_POSITIVE) && worst > 1e-300 {
        return Err(Error::NotDemeaned(worst));
    }
    Ok(())
}

pub(crate) fn require_panel(y: &DMatrix<f64>, min_t: usize, min_p: usize) -> Result<()> {
    if y.nrows() < min_t {
        return Err(Error::InsufficientHistory {
            required: min_t - 1,
            actual: y.nrows(),
        });
    }
    if y.ncols() < min_p {
        return Err(Error::Dimension(format!(
            "need at least {min_p} assets, got {}",
            y.ncols()
        )));
    }
    Ok(())
}
