//! Rolling out-of-sample evaluation with drifted weights and proportional
//! transaction costs.
//!
//! Window `i` trains on rows `[i, i + T_I)` and is evaluated on row `i + T_I`.
//! The book carried into window `i` is window `i−1`'s weights drifted by that
//! window's realized returns; rebalancing to the new weights costs
//! `c(1 + gross)·turnover`.

mod report;

pub use report::{
    format_value, render_csv, render_latex, render_text, write_tables, Emphasis, Metric,
    MetricTable, ReportHeader, TableRow,
};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{rolling_windows, FactorPanel, ReturnsPanel};
use crate::error::{Error, Result};
use crate::linalg::column_means;
use crate::method::{estimate_precision, EstimatorParams, Method};
use crate::portfolio::{portfolio_weights, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectiveKind {
    Gmv,
    Msr,
    Mv,
}

impl ObjectiveKind {
    /// Column order in report tables.
    pub const ALL: [ObjectiveKind; 3] = [ObjectiveKind::Gmv, ObjectiveKind::Msr, ObjectiveKind::Mv];

    pub fn label(self) -> &'static str {
        match self {
            ObjectiveKind::Gmv => "GMV",
            ObjectiveKind::Msr => "MSR",
            ObjectiveKind::Mv => "MV",
        }
    }

    pub fn with_params(self, rho1: f64, sigma: f64) -> Objective {
        match self {
            ObjectiveKind::Gmv => Objective::Gmv,
            ObjectiveKind::Msr => Objective::Msr { sigma },
            ObjectiveKind::Mv => Objective::Mv { rho1 },
        }
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gmv" => Ok(ObjectiveKind::Gmv),
            "msr" => Ok(ObjectiveKind::Msr),
            "mv" => Ok(ObjectiveKind::Mv),
            other => Err(Error::InvalidParameter(format!(
                "unknown objective '{other}' (valid: gmv, mv, msr)"
            ))),
        }
    }
}

/// How the first window's trade is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialAllocation {
    /// Start from an empty book: turnover is `Σ|w|`.
    #[default]
    FromCash,
    /// The first allocation is free: turnover 0.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub window_len: usize,
    pub cost: f64,
    pub rho1: f64,
    pub sigma: f64,
    pub objectives: Vec<ObjectiveKind>,
    pub methods: Vec<Method>,
    pub params: EstimatorParams,
    pub initial: InitialAllocation,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window_len: 180,
            cost: 0.005,
            rho1: 0.01,
            sigma: 0.05,
            objectives: ObjectiveKind::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            params: EstimatorParams::default(),
            initial: InitialAllocation::FromCash,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidParameter(format!(
                "window length must be >= 2, got {}",
                self.window_len
            )));
        }
        if !(0.0..1.0).contains(&self.cost) {
            return Err(Error::InvalidParameter(format!(
                "cost must be in [0, 1), got {}",
                self.cost
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.rho1.is_finite() {
            return Err(Error::InvalidParameter("rho1 must be finite".into()));
        }
        if self.objectives.is_empty() {
            return Err(Error::InvalidParameter("no objectives selected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub date: String,
    pub gross: f64,
    pub net: f64,
    pub turnover: f64,
    pub weights: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub mean_net: f64,
    /// Denominator `N − 1` over `N` windows.
    pub variance_net: f64,
    pub sharpe: f64,
    pub mean_turnover: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed { window: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub label: String,
    /// `None` for a benchmark series, which fills every objective column.
    pub objective: Option<ObjectiveKind>,
    pub windows: Vec<WindowRecord>,
    pub status: CellStatus,
    pub aggregates: Option<Aggregates>,
}

impl BacktestReport {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

/// Supplies a precision matrix for one training window.
pub trait PrecisionEstimator: Sync {
    fn label(&self) -> String;
    fn estimate(
        &self,
        returns: &DMatrix<f64>,
        factors: Option<&DMatrix<f64>>,
    ) -> Result<DMatrix<f64>>;
}

/// One of the built-in estimators with its parameters.
#[derive(Debug, Clone)]
pub struct MethodEstimator {
    pub method: Method,
    pub params: EstimatorParams,
}

impl PrecisionEstimator for MethodEstimator {
    fn label(&self) -> String {
        self.method.label().to_string()
    }

    fn estimate(
        &self,
        returns: &DMatrix<f64>,
        factors: Option<&DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        estimate_precision(self.method, returns, factors, &self.params).map(|e| e.precision)
    }
}

/// Weights after one period of drift: `w ∘ (1 + r) / (1 + w'r)`.
pub fn adjusted_weights(w_prev: &DVector<f64>, returns: &DVector<f64>) -> Result<DVector<f64>> {
    if w_prev.len() != returns.len() {
        return Err(Error::Dimension(format!(
            "{} weights, {} returns",
            w_prev.len(),
            returns.len()
        )));
    }
    let growth = 1.0 + w_prev.dot(returns);
    if growth.abs() < 1e-14 {
        return Err(Error::Wipeout);
    }
    Ok(w_prev.component_mul(&returns.add_scalar(1.0)) / growth)
}

/// `(net, turnover)` with gross `w_new'r`, turnover `Σ|w_new − w_drifted|`
/// and net `gross − c(1 + gross)·turnover`.
pub fn net_return(
    w_new: &DVector<f64>,
    w_drifted: &DVector<f64>,
    returns: &DVector<f64>,
    cost: f64,
) -> (f64, f64) {
    let gross = w_new.dot(returns);
    let turnover = (w_new - w_drifted).lp_norm(1);
    (gross - cost * (1.0 + gross) * turnover, turnover)
}

/// Mean, `N − 1` variance and Sharpe ratio of net returns; mean turnover.
/// A zero variance gives an infinite Sharpe ratio with the sign of the mean.
pub fn aggregate(records: &[WindowRecord]) -> Aggregates {
    let n = records.len() as f64;
    let mean_net = records.iter().map(|r| r.net).sum::<f64>() / n;
    let variance_net = if records.len() > 1 {
        records
            .iter()
            .map(|r| (r.net - mean_net).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        f64::NAN
    };
    let sharpe = if variance_net == 0.0 {
        if mean_net > 0.0 {
            f64::INFINITY
        } else if mean_net < 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::NAN
        }
    } else {
        mean_net / variance_net.sqrt()
    };
    Aggregates {
        mean_net,
        variance_net,
        sharpe,
        mean_turnover: records.iter().map(|r| r.turnover).sum::<f64>() / n,
    }
}

/// Chain one method×objective cell through its windows.
fn account(
    label: &str,
    objective: ObjectiveKind,
    dates: &[String],
    tests: &[DVector<f64>],
    weights: Vec<Result<DVector<f64>>>,
    config: &BacktestConfig,
) -> BacktestReport {
    let mut records = Vec::with_capacity(weights.len());
    let mut drifted: Option<DVector<f64>> = None;
    let fail = |window: usize, message: String, records: Vec<WindowRecord>| BacktestReport {
        label: label.to_string(),
        objective: Some(objective),
        windows: records,
        status: CellStatus::Failed { window, message },
        aggregates: None,
    };
    for (i, w) in weights.into_iter().enumerate() {
        let w = match w {
            Ok(w) => w,
            Err(e) => return fail(i, e.to_string(), records),
        };
        let r = &tests[i];
        let previous = match (&drifted, config.initial) {
            (Some(d), _) => d.clone(),
            (None, InitialAllocation::FromCash) => DVector::zeros(w.len()),
            (None, InitialAllocation::Free) => w.clone(),
        };
        let (net, turnover) = net_return(&w, &previous, r, config.cost);
        let gross = w.dot(r);
        drifted = match adjusted_weights(&w, r) {
            Ok(d) => Some(d),
            Err(e) => return fail(i, e.to_string(), records),
        };
        records.push(WindowRecord {
            date: dates[i].clone(),
            gross,
            net,
            turnover,
            weights: w,
        });
    }
    let aggregates = Some(aggregate(&records));
    BacktestReport {
        label: label.to_string(),
        objective: Some(objective),
        windows: records,
        status: CellStatus::Ok,
        aggregates,
    }
}

/// Backtest arbitrary estimators. Estimation runs in parallel over
/// (estimator, window); accounting is sequential within each cell. Reports
/// come back estimator-major, objectives in `config.objectives` order.
pub fn run_backtest_with(
    returns: &ReturnsPanel,
    factors: Option<&FactorPanel>,
    config: &BacktestConfig,
    estimators: &[&dyn PrecisionEstimator],
) -> Result<Vec<BacktestReport>> {
    config.validate()?;
    let windows = rolling_windows(returns, factors, config.window_len)?;
    let dates: Vec<String> = windows.iter().map(|w| w.test_date().to_string()).collect();
    let tests: Vec<DVector<f64>> = windows.iter().map(|w| w.test_returns()).collect();
    let objectives: Vec<Objective> = config
        .objectives
        .iter()
        .map(|o| o.with_params(config.rho1, config.sigma))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..estimators.len())
        .flat_map(|e| (0..windows.len()).map(move |w| (e, w)))
        .collect();
    // per job: one weight vector (or error) per objective
    let solved: Vec<Vec<Result<DVector<f64>>>> = jobs
        .par_iter()
        .map(|&(e, w)| {
            let view = &windows[w];
            let train = view.train_returns();
            let train_factors = view.train_factors();
            match estimators[e].estimate(&train, train_factors.as_ref()) {
                Ok(theta) => {
                    let mu = column_means(&train);
                    objectives
                        .iter()
                        .map(|&o| portfolio_weights(&theta, &mu, o).map(|pw| pw.weights))
                        .collect()
                }
                Err(err) => {
                    let msg = err.to_string();
                    objectives
                        .iter()
                        .map(|_| Err(Error::Data(msg.clone())))
                        .collect()
                }
            }
        })
        .collect();

    let mut per_estimator: Vec<Vec<Vec<Result<DVector<f64>>>>> =
        (0..estimators.len()).map(|_| Vec::new()).collect();
    for ((e, _), sols) in jobs.into_iter().zip(solved) {
        per_estimator[e].push(sols);
    }
    let mut reports = Vec::new();
    for (e, per_window) in per_estimator.into_iter().enumerate() {
        let label = estimators[e].label();
        let mut columns: Vec<Vec<Result<DVector<f64>>>> =
            objectives.iter().map(|_| Vec::new()).collect();
        for sols in per_window {
            for (k, s) in sols.into_iter().enumerate() {
                columns[k].push(s);
            }
        }
        for (k, weights) in columns.into_iter().enumerate() {
            reports.push(account(
                &label,
                config.objectives[k],
                &dates,
                &tests,
                weights,
                config,
            ));
        }
    }
    Ok(reports)
}

/// Backtest the configured built-in methods.
pub fn run_backtest(
    returns: &ReturnsPanel,
    factors: Option<&FactorPanel>,
    config: &BacktestConfig,
) -> Result<Vec<BacktestReport>> {
    if let Some(m) = config.methods.iter().find(|m| m.needs_factors()) {
        if factors.is_none() {
            return Err(Error::InvalidParameter(format!(
                "method {m} needs a factor panel"
            )));
        }
    }
    let estimators: Vec<MethodEstimator> = config
        .methods
        .iter()
        .map(|&method| MethodEstimator {
            method,
            params: config.params.clone(),
        })
        .collect();
    let refs: Vec<&dyn PrecisionEstimator> = estimators
        .iter()
        .map(|e| e as &dyn PrecisionEstimator)
        .collect();
    run_backtest_with(returns, factors, config, &refs)
}

/// Benchmark row from a one-column return series over the same test periods:
/// net equals gross and turnover is zero.
pub fn benchmark_report(
    series: &ReturnsPanel,
    window_len: usize,
    label: &str,
) -> Result<BacktestReport> {
    if series.n_assets() != 1 {
        return Err(Error::Dimension(format!(
            "benchmark must have one column, got {}",
            series.n_assets()
        )));
    }
    let windows = rolling_windows(series, None, window_len)?;
    let records: Vec<WindowRecord> = windows
        .iter()
        .map(|w| {
            let r = series.values[(w.test_index, 0)];
            WindowRecord {
                date: w.test_date().to_string(),
                gross: r,
                net: r,
                turnover: 0.0,
                weights: DVector::from_element(1, 1.0),
            }
        })
        .collect();
    Ok(BacktestReport {
        label: label.to_string(),
        objective: None,
        aggregates: Some(aggregate(&records)),
        windows: records,
        status: CellStatus::Ok,
    })
}
