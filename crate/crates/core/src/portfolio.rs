//! Closed-form weights for the global minimum variance, mean-variance
//! (Markowitz) and maximum Sharpe ratio portfolios, and plug-in analytics.
//!
//! Quadratic forms are reported in the dimension-scaled form
//! `A = 1'Θ1/p`, `F = 1'Θμ/p`, `D = μ'Θμ/p`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Gmv,
    /// Target return ρ₁.
    Mv {
        rho1: f64,
    },
    /// Risk budget σ.
    Msr {
        sigma: f64,
    },
}

impl Objective {
    pub fn label(&self) -> &'static str {
        match self {
            Objective::Gmv => "GMV",
            Objective::Mv { .. } => "MV",
            Objective::Msr { .. } => "MSR",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Gmv => write!(f, "GMV"),
            Objective::Mv { rho1 } => write!(f, "MV(rho1={rho1})"),
            Objective::Msr { sigma } => write!(f, "MSR(sigma={sigma})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights {
    pub weights: DVector<f64>,
    pub objective: Objective,
    pub method: String,
}

impl PortfolioWeights {
    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioAnalytics {
    pub expected_return: f64,
    pub variance: f64,
    pub sharpe: f64,
    pub a: f64,
    pub d: f64,
    pub f: f64,
}

/// Unscaled `1'Θ1`, `1'Θμ`, `μ'Θμ` together with `Θ1` and `Θμ`.
struct Moments {
    a1: f64,
    f1: f64,
    d1: f64,
    theta_one: DVector<f64>,
    theta_mu: DVector<f64>,
}

fn check_dims(theta: &DMatrix<f64>, mu: Option<&DVector<f64>>) -> Result<usize> {
    let p = theta.nrows();
    if p == 0 || theta.ncols() != p {
        return Err(Error::Dimension(format!(
            "precision must be square and nonempty, got {:?}",
            theta.shape()
        )));
    }
    if let Some(mu) = mu {
        if mu.len() != p {
            return Err(Error::Dimension(format!(
                "mean vector has length {}, expected {p}",
                mu.len()
            )));
        }
    }
    Ok(p)
}

fn moments(theta: &DMatrix<f64>, mu: &DVector<f64>) -> Moments {
    let theta_one = theta.column_sum();
    let theta_mu = theta * mu;
    Moments {
        a1: theta_one.sum(),
        f1: theta_mu.sum(),
        d1: mu.dot(&theta_mu),
        theta_one,
        theta_mu,
    }
}

fn check_normalizer(a1: f64, p: usize) -> Result<()> {
    if a1.abs() < 1e-12 * p as f64 || !a1.is_finite() {
        return Err(Error::DegenerateNormalizer(a1));
    }
    Ok(())
}

fn check_collinear(m: &Moments) -> Result<f64> {
    let det = m.a1 * m.d1 - m.f1 * m.f1;
    if !(det.abs() > 1e-12 * (m.a1 * m.d1).abs()) {
        return Err(Error::Collinear(det));
    }
    Ok(det)
}

/// `w = Θ1 / 1'Θ1`.
pub fn gmv_weights(theta: &DMatrix<f64>) -> Result<PortfolioWeights> {
    let p = check_dims(theta, None)?;
    let theta_one = theta.column_sum();
    let a1 = theta_one.sum();
    check_normalizer(a1, p)?;
    Ok(PortfolioWeights {
        weights: theta_one / a1,
        objective: Objective::Gmv,
        method: String::new(),
    })
}

/// Minimum variance subject to `w'1 = 1` and `w'μ̂ = ρ₁`.
pub fn markowitz_weights(
    theta: &DMatrix<f64>,
    mu: &DVector<f64>,
    rho1: f64,
) -> Result<PortfolioWeights> {
    check_dims(theta, Some(mu))?;
    let m = moments(theta, mu);
    let det = check_collinear(&m)?;
    let c_one = (m.d1 - rho1 * m.f1) / det;
    let c_mu = (rho1 * m.a1 - m.f1) / det;
    Ok(PortfolioWeights {
        weights: m.theta_one * c_one + m.theta_mu * c_mu,
        objective: Objective::Mv { rho1 },
        method: String::new(),
    })
}

/// `w = σ Θμ̂ / √(μ̂'Θμ̂)`.
pub fn msr_weights(
    theta: &DMatrix<f64>,
    mu: &DVector<f64>,
    sigma: f64,
) -> Result<PortfolioWeights> {
    check_dims(theta, Some(mu))?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let theta_mu = theta * mu;
    let d1 = mu.dot(&theta_mu);
    if !(d1 > 0.0) {
        return Err(Error::NonPositiveQuadraticForm(d1));
    }
    Ok(PortfolioWeights {
        weights: theta_mu * (sigma / d1.sqrt()),
        objective: Objective::Msr { sigma },
        method: String::new(),
    })
}

pub fn portfolio_weights(
    theta: &DMatrix<f64>,
    mu: &DVector<f64>,
    objective: Objective,
) -> Result<PortfolioWeights> {
    match objective {
        Objective::Gmv => {
            check_dims(theta, Some(mu))?;
            gmv_weights(theta)
        }
        Objective::Mv { rho1 } => markowitz_weights(theta, mu, rho1),
        Objective::Msr { sigma } => msr_weights(theta, mu, sigma),
    }
}

/// Plug-in return, variance and Sharpe ratio for `objective` under `Θ̂, μ̂`.
///
/// GMV: return `F/A`, variance `1/(pA)`, Sharpe `F/√A`.
/// MV: return `ρ₁`, variance `(Aρ₁² − 2Fρ₁ + D) / (p(AD − F²))`, Sharpe the ratio.
/// MSR: return `σ√D`, variance `σ²`, Sharpe `√D`.
pub fn analytics(
    theta: &DMatrix<f64>,
    mu: &DVector<f64>,
    objective: Objective,
) -> Result<PortfolioAnalytics> {
    let p = check_dims(theta, Some(mu))?;
    let pf = p as f64;
    let m = moments(theta, mu);
    let (a, f, d) = (m.a1 / pf, m.f1 / pf, m.d1 / pf);
    let (expected_return, variance, sharpe) = match objective {
        Objective::Gmv => {
            check_normalizer(m.a1, p)?;
            if a < 0.0 {
                return Err(Error::NonPositiveQuadraticForm(m.a1));
            }
            (f / a, 1.0 / (pf * a), f / a.sqrt())
        }
        Objective::Mv { rho1 } => {
            check_collinear(&m)?;
            let num = a * rho1 * rho1 - 2.0 * f * rho1 + d;
            let det = a * d - f * f;
            let variance = num / (pf * det);
            if !(variance > 0.0) {
                return Err(Error::NonPositiveQuadraticForm(variance));
            }
            (rho1, variance, rho1 / variance.sqrt())
        }
        Objective::Msr { sigma } => {
            if !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "sigma must be positive, got {sigma}"
                )));
            }
            if !(m.d1 > 0.0) {
                return Err(Error::NonPositiveQuadraticForm(m.d1));
            }
            (sigma * d.sqrt(), sigma * sigma, d.sqrt())
        }
    };
    Ok(PortfolioAnalytics {
        expected_return,
        variance,
        sharpe,
        a,
        d,
        f,
    })
}
