//! The seven precision estimators behind one tag, with their tuning knobs.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimate::CovarianceEstimate;
use crate::factor::{oft_precision, poet_precision, OftConfig, PoetConfig};
use crate::linalg::demean_columns;
use crate::nodewise::{nodewise_precision, residual_nodewise_precision, LambdaGrid};
use crate::shrinkage::{linear_shrinkage, nls_shrinkage, sfnl_shrinkage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Nw,
    Rnw,
    Poet,
    Oft,
    Lslw,
    Nls,
    Sfnl,
}

impl Method {
    /// Table order.
    pub const ALL: [Method; 7] = [
        Method::Nw,
        Method::Rnw,
        Method::Poet,
        Method::Oft,
        Method::Lslw,
        Method::Nls,
        Method::Sfnl,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Nw => "nw",
            Method::Rnw => "rnw",
            Method::Poet => "poet",
            Method::Oft => "oft",
            Method::Lslw => "lslw",
            Method::Nls => "nls",
            Method::Sfnl => "sfnl",
        }
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Nw => "NW",
            Method::Rnw => "Residual-based NW",
            Method::Poet => "POET",
            Method::Oft => "OFT",
            Method::Lslw => "LSLW",
            Method::Nls => "NLS",
            Method::Sfnl => "SFNL",
        }
    }

    /// Observed factors are required by the observed-factor and residual
    /// nodewise estimators.
    pub fn needs_factors(self) -> bool {
        matches!(self, Method::Rnw | Method::Oft)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == key)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.tag()).collect();
                Error::InvalidParameter(format!(
                    "unknown method '{s}' (valid: {})",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimatorParams {
    pub nw_grid: LambdaGrid,
    pub rnw_grid: LambdaGrid,
    pub poet: PoetConfig,
    pub oft: OftConfig,
}

/// Run `method` on raw T×p returns and optional T×K factors.
///
/// Shrinkage, naive nodewise and latent-factor estimators see demeaned
/// returns; the observed-factor estimators regress the raw returns on the raw
/// factors without an intercept.
pub fn estimate_precision(
    method: Method,
    returns: &DMatrix<f64>,
    factors: Option<&DMatrix<f64>>,
    params: &EstimatorParams,
) -> Result<CovarianceEstimate> {
    let factor_rows = || -> Result<DMatrix<f64>> {
        let f = factors.ok_or_else(|| {
            Error::InvalidParameter(format!("method {method} needs observed factors"))
        })?;
        if f.nrows() != returns.nrows() {
            return Err(Error::Dimension(format!(
                "factors have {} rows, returns have {}",
                f.nrows(),
                returns.nrows()
            )));
        }
        Ok(f.transpose())
    };
    match method {
        Method::Nw => nodewise_precision(&demean_columns(returns), &params.nw_grid),
        Method::Rnw => residual_nodewise_precision(returns, &factor_rows()?, &params.rnw_grid),
        Method::Poet => poet_precision(&demean_columns(returns), &params.poet),
        Method::Oft => oft_precision(returns, &factor_rows()?, &params.oft),
        Method::Lslw => linear_shrinkage(&demean_columns(returns)).map(|(e, _)| e),
        Method::Nls => nls_shrinkage(&demean_columns(returns)).map(|(e, _)| e),
        Method::Sfnl => sfnl_shrinkage(&demean_columns(returns)),
    }
}
