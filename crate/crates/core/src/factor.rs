//! Factor-model precision estimators: observed factors with an adaptively
//! thresholded error covariance, and principal-component (latent) factors
//! with the same thresholding. Both invert through the Woodbury identity.
//!
//! Returns are T×p; observed factors are K×T.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimate::CovarianceEstimate;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Observed,
    Latent,
}

#[derive(Debug, Clone)]
pub struct FactorFit {
    /// p×K.
    pub loadings: DMatrix<f64>,
    /// T×p.
    pub residuals: DMatrix<f64>,
    /// K×K; identity for latent fits.
    pub factor_cov: DMatrix<f64>,
    pub kind: FactorKind,
}

#[derive(Debug, Clone)]
pub struct ThresholdedErrorCov {
    /// Thresholded covariance; the diagonal is the raw residual variance.
    pub matrix: DMatrix<f64>,
    pub omega_t: f64,
    pub threshold_const: f64,
    /// Surviving off-diagonal entries over p(p−1).
    pub kept_fraction: f64,
    /// Ridge added by [`ThresholdedErrorCov::regularized`] when `matrix` is
    /// not positive definite; zero otherwise.
    pub pd_bump: f64,
}

impl ThresholdedErrorCov {
    /// `matrix + pd_bump·I`, the version that gets inverted.
    pub fn regularized(&self) -> DMatrix<f64> {
        let mut m = self.matrix.clone();
        if self.pd_bump > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += self.pd_bump;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OftConfig {
    /// Multiplier `a` in `ω_T = a·K·√(log p / T)`.
    pub omega_const: f64,
    /// Threshold constant `C`.
    pub threshold: f64,
}

impl Default for OftConfig {
    fn default() -> Self {
        Self {
            omega_const: 0.1,
            threshold: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoetConfig {
    /// Largest factor count searched.
    pub max_factors: usize,
    pub threshold: f64,
}

impl Default for PoetConfig {
    fn default() -> Self {
        Self {
            max_factors: 8,
            threshold: 0.5,
        }
    }
}

fn check_shapes(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() != y.nrows() {
        return Err(Error::Dimension(format!(
            "factors cover {} periods, returns cover {}",
            x.ncols(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 || x.nrows() >= y.nrows() {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= K < T, got K={} T={}",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

/// Per-asset least squares on observed factors without an intercept:
/// `B̂ = Y'X'(XX')⁻¹`, `Σ̂_f = XX'/T − X11'X'/T²`.
pub fn ols_factor_fit(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<FactorFit> {
    check_shapes(y, x)?;
    let t = y.nrows() as f64;
    let xxt = x * x.transpose();
    let xxt_inv = linalg::invert_checked(&xxt, "factor Gram matrix XX'")?;
    let loadings = y.transpose() * x.transpose() * xxt_inv;
    let residuals = y - x.transpose() * loadings.transpose();

    let sums = x.column_sum();
    let factor_cov = linalg::symmetrize(&(&xxt / t - &sums * sums.transpose() / (t * t)));
    for k in 0..factor_cov.nrows() {
        let scale = xxt[(k, k)] / t;
        if !(factor_cov[(k, k)] > 1e-12 * scale) {
            return Err(Error::DegenerateColumn { index: k });
        }
    }
    Ok(FactorFit {
        loadings,
        residuals,
        factor_cov,
        kind: FactorKind::Observed,
    })
}

/// Keep `σ̂_ij` only where `|σ̂_ij| ≥ C √θ̂_ij ω_T`, with
/// `θ̂_ij = T⁻¹ Σ_t (û_it û_jt − σ̂_ij)²`. The diagonal is never cut.
pub fn adaptive_threshold_cov(
    residuals: &DMatrix<f64>,
    omega_t: f64,
    c: f64,
) -> Result<ThresholdedErrorCov> {
    let (t, p) = residuals.shape();
    if t < 2 {
        return Err(Error::InsufficientHistory {
            required: 1,
            actual: t,
        });
    }
    if !(omega_t >= 0.0 && c >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold inputs must be >= 0 (omega={omega_t}, C={c})"
        )));
    }
    let tf = t as f64;
    let sigma = linalg::symmetrize(&(residuals.tr_mul(residuals) / tf));
    let sq = residuals.map(|v| v * v);
    let fourth = sq.tr_mul(&sq) / tf;

    let mut matrix = sigma.clone();
    let mut kept = 0usize;
    for i in 0..p {
        for j in (i + 1)..p {
            let s = sigma[(i, j)];
            let theta = (fourth[(i, j)] - s * s).max(0.0);
            if s.abs() >= c * theta.sqrt() * omega_t {
                kept += 2;
            } else {
                matrix[(i, j)] = 0.0;
                matrix[(j, i)] = 0.0;
            }
        }
    }
    let kept_fraction = if p > 1 {
        kept as f64 / (p * (p - 1)) as f64
    } else {
        0.0
    };
    let min_eig = linalg::spectral(&matrix)?.min_eigenvalue();
    let pd_bump = if min_eig > 0.0 {
        0.0
    } else {
        min_eig.abs() + 1e-8
    };
    Ok(ThresholdedErrorCov {
        matrix,
        omega_t,
        threshold_const: c,
        kept_fraction,
        pd_bump,
    })
}

fn assemble(
    method: &str,
    fit: &FactorFit,
    errors: &ThresholdedErrorCov,
    factor_precision: &DMatrix<f64>,
) -> Result<CovarianceEstimate> {
    let sigma_u = errors.regularized();
    let omega = linalg::spd_inverse(&sigma_u).map_err(|e| {
        Error::NotPositiveDefinite(format!(
            "thresholded error covariance ({e}); try a larger threshold constant"
        ))
    })?;
    let precision = linalg::smw_precision(&omega, &fit.loadings, factor_precision)?;
    let cov =
        linalg::symmetrize(&(&fit.loadings * &fit.factor_cov * fit.loadings.transpose() + sigma_u));
    Ok(CovarianceEstimate::new(method, Some(cov), precision)
        .with_tuning("k", fit.loadings.ncols() as f64)
        .with_tuning("omega_t", errors.omega_t)
        .with_tuning("threshold", errors.threshold_const)
        .with_tuning("kept_fraction", errors.kept_fraction)
        .with_tuning("pd_bump", errors.pd_bump))
}

/// Observed-factor precision: OLS loadings, thresholded residual covariance
/// with `ω_T = a·K·√(log p/T)`, Woodbury assembly.
pub fn oft_precision(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    config: &OftConfig,
) -> Result<CovarianceEstimate> {
    let fit = ols_factor_fit(y, x)?;
    let (t, p) = y.shape();
    let k = x.nrows() as f64;
    let omega_t = config.omega_const * k * ((p as f64).ln() / t as f64).sqrt();
    let errors = adaptive_threshold_cov(&fit.residuals, omega_t, config.threshold)?;
    let factor_precision = linalg::invert_checked(&fit.factor_cov, "factor covariance")?;
    assemble("OFT", &fit, &errors, &factor_precision)
}

/// Spectrum of `Y'Y` (equivalently the nonzero part of `YY'`), descending.
fn gram_eigenvalues_desc(y: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (t, p) = y.shape();
    let gram = if p <= t {
        y.tr_mul(y)
    } else {
        y * y.transpose()
    };
    let mut v: Vec<f64> = linalg::spectral(&linalg::symmetrize(&gram))?
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.reverse();
    Ok(v)
}

/// Information-criterion choice of the latent factor count over `1..=M`:
/// `IC(K) = log V(K) + K·((p+T)/(pT))·log min(p,T)`, with `V(K)` the
/// residual sum of squares after removing `K` principal components, over
/// `pT`. Ties go to the smaller `K`.
pub fn select_num_factors(y: &DMatrix<f64>, max_factors: usize) -> Result<usize> {
    let (t, p) = y.shape();
    if max_factors == 0 || max_factors >= p.min(t) {
        return Err(Error::InvalidParameter(format!(
            "factor search bound M={max_factors} must satisfy 1 <= M < min(p, T) = {}",
            p.min(t)
        )));
    }
    let eig = gram_eigenvalues_desc(y)?;
    let (pf, tf) = (p as f64, t as f64);
    let total: f64 = y.norm_squared();
    let penalty = (pf + tf) / (pf * tf) * pf.min(tf).ln();
    let mut best = (f64::INFINITY, 1usize);
    let mut removed = 0.0;
    for k in 1..=max_factors {
        removed += eig[k - 1].max(0.0);
        let v = ((total - removed) / (pf * tf)).max(0.0);
        let ic = v.ln() + k as f64 * penalty;
        if ic < best.0 {
            best = (ic, k);
        }
    }
    Ok(best.1)
}

/// Principal-component fit with `k` factors: `F̂` is √T times the top
/// eigenvectors of `YY'`, `B̂ = Y'F̂/T`, so `F̂'F̂/T = I`.
pub fn latent_factor_fit(y: &DMatrix<f64>, k: usize) -> Result<FactorFit> {
    let (t, p) = y.shape();
    if k == 0 || k >= p.min(t) {
        return Err(Error::InvalidParameter(format!(
            "latent factor count {k} out of range"
        )));
    }
    let tf = t as f64;
    let mut factors = DMatrix::zeros(t, k);
    if t <= p {
        let eig = linalg::spectral(&linalg::symmetrize(&(y * y.transpose())))?;
        for j in 0..k {
            factors.set_column(j, &(eig.eigenvectors.column(t - 1 - j) * tf.sqrt()));
        }
    } else {
        let eig = linalg::spectral(&linalg::symmetrize(&y.tr_mul(y)))?;
        for j in 0..k {
            let idx = p - 1 - j;
            let lambda = eig.eigenvalues[idx];
            if !(lambda > 0.0) {
                return Err(Error::DegeneratePanel(format!(
                    "principal component {} has zero variance",
                    j + 1
                )));
            }
            let u = y * eig.eigenvectors.column(idx) / lambda.sqrt();
            factors.set_column(j, &(u * tf.sqrt()));
        }
    }
    let loadings = y.transpose() * &factors / tf;
    let residuals = y - &factors * loadings.transpose();
    Ok(FactorFit {
        loadings,
        residuals,
        factor_cov: DMatrix::identity(k, k),
        kind: FactorKind::Latent,
    })
}

/// Latent-factor precision: factor count by [`select_num_factors`] (bounded by
/// `min(p,T) − 1`), principal-component fit, residual thresholding at
/// `ω_T = 1/√p + √(log p/T)`, Woodbury assembly with `Σ_f = I`.
pub fn poet_precision(y: &DMatrix<f64>, config: &PoetConfig) -> Result<CovarianceEstimate> {
    let (t, p) = y.shape();
    if p < 2 || t < 3 {
        return Err(Error::Dimension(format!(
            "latent factor model needs p >= 2 and T >= 3, got p={p} T={t}"
        )));
    }
    let bound = config.max_factors.min(p.min(t) - 1);
    let k = select_num_factors(y, bound)?;
    let fit = latent_factor_fit(y, k)?;
    let pf = p as f64;
    let omega_t = 1.0 / pf.sqrt() + (pf.ln() / t as f64).sqrt();
    let errors = adaptive_threshold_cov(&fit.residuals, omega_t, config.threshold)?;
    assemble("POET", &fit, &errors, &DMatrix::identity(k, k))
}
