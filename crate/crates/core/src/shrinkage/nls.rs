//! Nonlinear shrinkage: keep the sample eigenvectors, replace every sample
//! eigenvalue `λ` by `d̂(λ) = 1 / (λ |ŝ(λ)|²)`, and map the null cluster (when
//! `p > T`) to the common value `1 / ((p/T − 1) ŝ(0))`.
//!
//! `ŝ` estimates the Stieltjes transform of the limiting companion spectral
//! distribution. It is built from an Epanechnikov kernel density over the
//! positive sample eigenvalues with locally adaptive bandwidth `h λ_j`,
//! `h = T^(-1/3)`, together with the closed-form Hilbert transform of that
//! kernel, so no numerical inversion of the spectral map is needed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{require_demeaned, require_panel};
use crate::error::{Error, Result};
use crate::estimate::CovarianceEstimate;
use crate::linalg;

/// Shortest training window accepted by [`nls_shrinkage`].
pub const MIN_NLS_PERIODS: usize = 12;

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, PartialEq)]
pub struct NlsDiagnostics {
    /// Concentration `p / T` (with `T` the effective sample size).
    pub c: f64,
    /// `d̂(λ_i)` paired with the ascending sample eigenvalues.
    pub shrunk_eigenvalues: DVector<f64>,
    /// `|ŝ(λ_i)|` for each eigenvalue; null-cluster entries carry `ŝ(0)`.
    pub stieltjes: Vec<f64>,
    /// `ŝ(0)`, present only when `p > T`.
    pub stieltjes_zero: Option<f64>,
    pub bandwidth: f64,
    /// Number of eigenvalues treated as exact zeros (`p − T` when `p > T`).
    pub zero_count: usize,
}

/// Kernel density `f̃` and Hilbert transform `H̃` of the positive spectrum at `x`.
fn kernel_density_and_hilbert(x: f64, support: &[f64], h: f64) -> (f64, f64) {
    let n = support.len() as f64;
    let mut density = 0.0;
    let mut hilbert = 0.0;
    for &lj in support {
        let width = h * lj;
        let u = (x - lj) / width;
        let bump = 1.0 - u * u / 5.0;
        if bump > 0.0 {
            density += 3.0 / (4.0 * SQRT5) * bump / width;
        }
        let mut hv = -3.0 / (10.0 * PI) * u;
        let ratio = (SQRT5 - u) / (SQRT5 + u);
        if ratio != 0.0 && ratio.is_finite() {
            hv += 3.0 / (4.0 * SQRT5 * PI) * bump * ratio.abs().ln();
        }
        hilbert += hv / width;
    }
    (density / n, hilbert / n)
}

/// Least-squares nondecreasing fit (pool adjacent violators). Block means
/// keep the sum unchanged.
fn isotonic_in_place(v: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v.iter() {
        let mut cur = (x, 1usize);
        while let Some(&(m, n)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let total = n + cur.1;
            cur = ((m * n as f64 + cur.0 * cur.1 as f64) / total as f64, total);
        }
        blocks.push(cur);
    }
    let mut i = 0;
    for (m, n) in blocks {
        v[i..i + n].fill(m);
        i += n;
    }
}

/// Estimate `|ŝ(λ_i)|` and the shrunk eigenvalues `d̂(λ_i)` from an ascending
/// sample spectrum of length `p`, concentration `c = p/T` and sample size `T`.
///
/// For `c > 1` the smallest `p − T` eigenvalues form the null cluster and must
/// be (numerically) zero; the remaining `T` must be positive.
pub fn estimate_stieltjes(eigenvalues: &[f64], c: f64, t: usize) -> Result<NlsDiagnostics> {
    let p = eigenvalues.len();
    if p == 0 || t == 0 {
        return Err(Error::Dimension(
            "empty spectrum or zero sample size".into(),
        ));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "concentration must be positive, got {c}"
        )));
    }
    if p == t || c == 1.0 {
        return Err(Error::UnitAspectRatio(p));
    }
    if ((p as f64 / t as f64) - c).abs() > 1e-9 * c {
        return Err(Error::InvalidParameter(format!(
            "c={c} inconsistent with p={p}, T={t}"
        )));
    }
    if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "eigenvalues must be ascending".into(),
        ));
    }
    if eigenvalues.iter().all(|&l| l <= 0.0) {
        return Err(Error::DegeneratePanel("all eigenvalues are zero".into()));
    }
    let zero_count = p.saturating_sub(t);
    let positive = &eigenvalues[zero_count..];
    if positive[0] <= 0.0 {
        return Err(Error::DegeneratePanel(format!(
            "expected {} positive eigenvalues, smallest is {:e}",
            positive.len(),
            positive[0]
        )));
    }
    let h = (t as f64).powf(-1.0 / 3.0);

    let mut shrunk = Vec::with_capacity(p);
    let mut stieltjes = Vec::with_capacity(p);
    let mut stieltjes_zero = None;

    if zero_count > 0 {
        let sh = SQRT5 * h;
        if sh >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {h:.4} too wide for the null cluster (T={t} too small)"
            )));
        }
        let mean_inv = positive.iter().map(|l| 1.0 / l).sum::<f64>() / positive.len() as f64;
        let hilbert0 = (3.0 / (10.0 * h * h)
            + 3.0 / (4.0 * SQRT5 * h)
                * (1.0 - 1.0 / (5.0 * h * h))
                * ((1.0 + sh) / (1.0 - sh)).ln())
            * mean_inv
            / PI;
        let s0 = PI * hilbert0;
        if !(s0 > 0.0) {
            return Err(Error::DegeneratePanel(format!(
                "non-positive Stieltjes estimate at zero ({s0:e})"
            )));
        }
        let d0 = 1.0 / ((c - 1.0) * s0);
        stieltjes_zero = Some(s0);
        for _ in 0..zero_count {
            shrunk.push(d0);
            stieltjes.push(s0);
        }
        for &l in positive {
            let (f, hf) = kernel_density_and_hilbert(l, positive, h);
            let s2 = PI * PI * (f * f + hf * hf);
            stieltjes.push(s2.sqrt());
            shrunk.push(1.0 / (l * s2));
        }
    } else {
        for &l in positive {
            let (f, hf) = kernel_density_and_hilbert(l, positive, h);
            let im = PI * c * l * f;
            let re = 1.0 - c - PI * c * l * hf;
            let s2 = (im * im + re * re) / (l * l);
            stieltjes.push(s2.sqrt());
            shrunk.push(1.0 / (l * s2));
        }
    }
    isotonic_in_place(&mut shrunk[zero_count..]);
    if let Some(bad) = shrunk.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::DegeneratePanel(format!(
            "non-positive shrunk eigenvalue {bad:e}"
        )));
    }
    Ok(NlsDiagnostics {
        c,
        shrunk_eigenvalues: DVector::from_vec(shrunk),
        stieltjes,
        stieltjes_zero,
        bandwidth: h,
        zero_count,
    })
}

/// Nonlinear shrinkage covariance `U diag(d̂) U'` on demeaned T×p returns.
///
/// The null cluster is sized from the numerical rank of `S`; for demeaned
/// data with `p ≥ T` that is `p − T + 1`, so the effective sample size is
/// `T − 1`.
///
/// The raw kernel map can wiggle across neighbouring eigenvalues; it is
/// projected onto nondecreasing sequences so the shrunk spectrum keeps the
/// sample ordering.
pub fn nls_shrinkage(y: &DMatrix<f64>) -> Result<(CovarianceEstimate, NlsDiagnostics)> {
    require_panel(y, MIN_NLS_PERIODS, 2)?;
    require_demeaned(y)?;
    let (t, p) = y.shape();
    if p == t {
        return Err(Error::UnitAspectRatio(p));
    }
    let s = linalg::symmetrize(&(y.tr_mul(y) / t as f64));
    let eig = linalg::spectral(&s)?;
    let lmax = eig.max_eigenvalue();
    if !(lmax > 0.0) {
        return Err(Error::DegeneratePanel("all eigenvalues are zero".into()));
    }
    let tol = 1e-12 * lmax;
    let numerical_zeros = eig.eigenvalues.iter().filter(|&&l| l <= tol).count();
    let zeros = numerical_zeros.max(p.saturating_sub(t));
    let effective_t = if zeros == 0 { t } else { p - zeros };
    let spectrum: Vec<f64> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| if i < zeros { 0.0 } else { l })
        .collect();
    let diag = estimate_stieltjes(&spectrum, p as f64 / effective_t as f64, effective_t)?;

    let d = diag.shrunk_eigenvalues.as_slice();
    let cov = eig.with_eigenvalues(d);
    let inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
    let precision = eig.with_eigenvalues(&inv);
    let estimate = CovarianceEstimate::new("NLS", Some(cov), precision)
        .with_tuning("c", diag.c)
        .with_tuning("bandwidth", diag.bandwidth)
        .with_tuning("zero_count", diag.zero_count as f64)
        .with_tuning("effective_t", effective_t as f64);
    Ok((estimate, diag))
}
