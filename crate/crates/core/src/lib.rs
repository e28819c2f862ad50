//! Precision-matrix estimators for large portfolios and a rolling
//! out-of-sample backtester.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod data;
pub mod error;
pub mod estimate;
pub mod factor;
pub mod linalg;
pub mod method;
pub mod nodewise;
pub mod portfolio;
pub mod shrinkage;

pub use backtest::{BacktestConfig, BacktestReport, Metric, ObjectiveKind};
pub use data::{FactorPanel, ReturnsPanel};
pub use error::{Error, Result};
pub use estimate::{CovarianceEstimate, PrecisionEstimate};
pub use method::{estimate_precision, EstimatorParams, Method};
pub use portfolio::{Objective, PortfolioWeights};
