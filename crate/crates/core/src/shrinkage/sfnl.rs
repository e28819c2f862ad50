//! Nonlinear shrinkage after whitening by an equal-weighted one-factor model.

use nalgebra::{DMatrix, DVector};

use super::nls::nls_shrinkage;
use super::{require_demeaned, require_panel};
use crate::error::{Error, Result};
use crate::estimate::CovarianceEstimate;
use crate::linalg;

/// Residual variances are floored at this multiple of the mean asset variance.
const RESIDUAL_FLOOR: f64 = 1e-10;

/// Exact one-factor covariance `v̂_m β̂β̂' + diag(σ̂²_resid)` with the
/// equal-weighted cross-sectional mean as the factor. Moments use `1/T`.
pub fn single_factor_cov(y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_panel(y, 3, 1)?;
    let (t, p) = y.shape();
    let tf = t as f64;
    let market: DVector<f64> = DVector::from_fn(t, |r, _| y.row(r).sum() / p as f64);
    let m_centered = market.add_scalar(-market.mean());
    let v_m = m_centered.norm_squared() / tf;
    if !(v_m > 1e-14 * market.norm_squared() / tf) {
        return Err(Error::DegeneratePanel(
            "market factor has zero variance".into(),
        ));
    }
    let yc = linalg::demean_columns(y);
    let beta: DVector<f64> = yc.tr_mul(&m_centered) / (tf * v_m);
    let variances: Vec<f64> = (0..p).map(|j| yc.column(j).norm_squared() / tf).collect();
    let floor = RESIDUAL_FLOOR * variances.iter().sum::<f64>() / p as f64;

    let mut cov = &beta * beta.transpose() * v_m;
    for j in 0..p {
        let resid = variances[j] - beta[j] * beta[j] * v_m;
        cov[(j, j)] += resid.max(floor);
    }
    Ok(linalg::symmetrize(&cov))
}

/// `Σ̂_f^{1/2} Σ̂_c Σ̂_f^{1/2}` where `Σ̂_c` is nonlinear shrinkage of
/// `Y Σ̂_f^{-1/2}` and `Σ̂_f` is [`single_factor_cov`]. Expects demeaned Y.
pub fn sfnl_shrinkage(y: &DMatrix<f64>) -> Result<CovarianceEstimate> {
    require_demeaned(y)?;
    let target = single_factor_cov(y)?;
    sfnl_with_target(y, &target)
}

/// Same as [`sfnl_shrinkage`] with a caller-supplied SPD target `Σ̂_f`.
pub fn sfnl_with_target(y: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<CovarianceEstimate> {
    let p = y.ncols();
    if target.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "target is {:?}, expected {p}x{p}",
            target.shape()
        )));
    }
    let (root, inv_root) = linalg::spd_sqrt_pair(target)?;
    let whitened = y * &inv_root;
    let (inner, _) = nls_shrinkage(&whitened)?;
    let inner_cov = inner
        .cov
        .as_ref()
        .expect("nonlinear shrinkage returns a covariance");
    let cov = linalg::symmetrize(&(&root * inner_cov * &root));
    let precision = linalg::symmetrize(&(&inv_root * &inner.precision * &inv_root));
    let mut estimate = CovarianceEstimate::new("SFNL", Some(cov), precision);
    estimate.tuning = inner.tuning;
    Ok(estimate)
}
