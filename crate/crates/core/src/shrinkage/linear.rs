use nalgebra::DMatrix;

use super::{require_demeaned, require_panel};
use crate::error::{Error, Result};
use crate::estimate::CovarianceEstimate;
use crate::linalg;

/// Plug-in quantities behind the linear shrinkage intensity.
///
/// Norms are the dimension-scaled Frobenius norm `‖A‖² = tr(AA')/p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearShrinkageDiagnostics {
    /// Mean sample eigenvalue, `tr(S)/p`; the target is `m̂ I`.
    pub m_hat: f64,
    /// `‖S − m̂I‖²`.
    pub d_hat2: f64,
    /// Dispersion of the rank-one terms around S, `T⁻² Σ_t ‖y_t y_t' − S‖²`.
    pub b_bar2: f64,
    /// `min(b̄², d̂²)`.
    pub b_hat2: f64,
    /// `d̂² − b̂²`.
    pub a_hat2: f64,
    /// Weight on the target, `b̂²/d̂²` (zero when `d̂² = 0`).
    pub intensity: f64,
}

/// Linear shrinkage `Ŝ = (b̂²/d̂²) m̂ I + (â²/d̂²) S` on demeaned T×p returns,
/// with precision `Ŝ⁻¹`.
pub fn linear_shrinkage(
    y: &DMatrix<f64>,
) -> Result<(CovarianceEstimate, LinearShrinkageDiagnostics)> {
    let (cov, diagnostics) = shrunk_covariance(y)?;
    let precision = linalg::spd_inverse(&cov)?;
    let estimate = CovarianceEstimate::new("LSLW", Some(cov), precision)
        .with_tuning("intensity", diagnostics.intensity)
        .with_tuning("m_hat", diagnostics.m_hat);
    Ok((estimate, diagnostics))
}

fn shrunk_covariance(y: &DMatrix<f64>) -> Result<(DMatrix<f64>, LinearShrinkageDiagnostics)> {
    require_panel(y, 2, 2)?;
    require_demeaned(y)?;
    let (t, p) = y.shape();
    let pf = p as f64;
    let s = linalg::symmetrize(&(y.tr_mul(y) / t as f64));

    let m_hat = s.trace() / pf;
    if !(m_hat > 0.0) {
        return Err(Error::DegeneratePanel(
            "all returns are zero (mean eigenvalue is 0)".into(),
        ));
    }
    let mut centered = s.clone();
    for i in 0..p {
        centered[(i, i)] -= m_hat;
    }
    let d_hat2 = centered.norm_squared() / pf;

    // ‖y y' − S‖_F² = (y'y)² − 2 y'Sy + ‖S‖_F²
    let s_norm2 = s.norm_squared();
    let sy = y * &s;
    let b_sum: f64 = (0..t)
        .map(|r| {
            let row = y.row(r);
            let yy = row.norm_squared();
            let ysy = row.dot(&sy.row(r));
            (yy * yy - 2.0 * ysy + s_norm2).max(0.0) / pf
        })
        .sum();
    let b_bar2 = b_sum / (t as f64 * t as f64);
    let b_hat2 = b_bar2.min(d_hat2);
    let a_hat2 = d_hat2 - b_hat2;
    let intensity = if d_hat2 > 0.0 { b_hat2 / d_hat2 } else { 0.0 };

    let mut cov = s * (1.0 - intensity);
    for i in 0..p {
        cov[(i, i)] += intensity * m_hat;
    }
    let diagnostics = LinearShrinkageDiagnostics {
        m_hat,
        d_hat2,
        b_bar2,
        b_hat2,
        a_hat2,
        intensity,
    };
    Ok((cov, diagnostics))
}
