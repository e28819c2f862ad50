//! Nodewise-regression precision matrices: each asset is lasso-regressed on
//! the others and the coefficients become a row of the inverse.
//!
//! The naive version works on demeaned returns with a per-row λ; the residual
//! version works on factor-model residuals with one shared λ and adds the
//! factor part back through the Woodbury identity.

mod lasso;

pub use lasso::{lasso, soft_threshold, GramProblem, LassoSolution, MAX_SWEEPS, TOLERANCE};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::CovarianceEstimate;
use crate::factor::ols_factor_fit;
use crate::linalg;
use crate::shrinkage::require_demeaned;

/// Candidate penalties for tuning.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    /// `points` log-spaced values from `ratio·λ_max` to `λ_max`.
    Auto {
        points: usize,
        ratio: f64,
    },
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            points: 50,
            ratio: 0.01,
        }
    }
}

impl LambdaGrid {
    /// Concrete grid in descending order.
    pub fn resolve(&self, lambda_max: f64) -> Result<Vec<f64>> {
        let mut grid = match self {
            LambdaGrid::Auto { points, ratio } => {
                if *points == 0 || !(*ratio > 0.0 && *ratio <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "lambda grid needs points >= 1 and ratio in (0, 1], got {points}, {ratio}"
                    )));
                }
                if *points == 1 {
                    vec![lambda_max]
                } else {
                    let lo = ratio.ln();
                    (0..*points)
                        .map(|i| lambda_max * (lo * i as f64 / (*points - 1) as f64).exp())
                        .collect()
                }
            }
            LambdaGrid::Explicit(values) => {
                if values.is_empty() || values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::InvalidParameter(
                        "explicit lambda grid must be nonempty and >= 0".into(),
                    ));
                }
                values.clone()
            }
        };
        grid.sort_by(|a, b| b.total_cmp(a));
        grid.dedup();
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GicVariant {
    /// `log σ̂² + |S|·(log p / n)·log log n`.
    Naive,
    /// `SSR/n + q·log(p − 1)·log log n / n`.
    Residual,
}

impl GicVariant {
    pub fn score(self, problem: &GramProblem, solution: &LassoSolution, p_total: usize) -> f64 {
        let n = problem.n as f64;
        let mse = problem.mean_squared_residual(&solution.coefficients);
        let q = solution.active_set.len() as f64;
        let loglog = n.ln().ln();
        match self {
            GicVariant::Naive => {
                if mse <= 0.0 {
                    f64::INFINITY
                } else {
                    mse.ln() + q * (p_total as f64).ln() / n * loglog
                }
            }
            GicVariant::Residual => mse + q * ((p_total as f64) - 1.0).ln() * loglog / n,
        }
    }
}

/// Fit the lasso along `grid` (warm-started from large to small λ) and keep
/// the minimizer of the chosen GIC. Ties go to the larger λ.
pub fn gic_select(
    problem: &GramProblem,
    grid: &LambdaGrid,
    p_total: usize,
    variant: GicVariant,
) -> Result<(f64, LassoSolution)> {
    if problem.n < 3 {
        return Err(Error::InsufficientHistory {
            required: 2,
            actual: problem.n,
        });
    }
    let lambdas = grid.resolve(problem.lambda_max())?;
    let mut warm: Option<DVector<f64>> = None;
    let mut best: Option<(f64, LassoSolution)> = None;
    for lambda in lambdas {
        let sol = problem.solve(lambda, warm.as_ref())?;
        let score = variant.score(problem, &sol, p_total);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, sol.clone()));
        }
        warm = Some(sol.coefficients);
    }
    let (_, sol) = best.expect("grid is nonempty");
    Ok((sol.lambda, sol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodewiseRow {
    pub j: usize,
    pub tau_sq: f64,
    pub lambda: f64,
    /// Coefficients on the other `p − 1` assets, in index order.
    pub gamma: DVector<f64>,
    /// `(1 at j, −γ̂ elsewhere) / τ̂²`.
    pub row: DVector<f64>,
}

/// Regression of column `j` on the rest, read off a p×p second-moment matrix.
fn node_problem(second_moment: &DMatrix<f64>, j: usize, n: usize) -> GramProblem {
    let p = second_moment.nrows();
    let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    GramProblem {
        gram: second_moment.select_rows(&others).select_columns(&others),
        xty: DVector::from_fn(p - 1, |i, _| second_moment[(others[i], j)]),
        yy: second_moment[(j, j)],
        n,
    }
}

fn build_row(j: usize, p: usize, gamma: &DVector<f64>, tau_sq: f64, lambda: f64) -> NodewiseRow {
    let mut row = DVector::zeros(p);
    row[j] = 1.0 / tau_sq;
    for k in 0..p - 1 {
        let col = if k < j { k } else { k + 1 };
        row[col] = -gamma[k] / tau_sq;
    }
    NodewiseRow {
        j,
        tau_sq,
        lambda,
        gamma: gamma.clone(),
        row,
    }
}

fn check_columns(second_moment: &DMatrix<f64>) -> Result<()> {
    let scale = second_moment.diagonal().amax();
    for j in 0..second_moment.nrows() {
        if !(second_moment[(j, j)] > 1e-14 * scale) {
            return Err(Error::DegenerateColumn { index: j });
        }
    }
    Ok(())
}

fn stack_rows(rows: &[NodewiseRow]) -> DMatrix<f64> {
    let p = rows.len();
    DMatrix::from_fn(p, p, |i, k| rows[i].row[k])
}

/// Per-row lasso regressions with λ_j chosen by the naive GIC and
/// `τ̂_j² = ‖r_j‖²/n + λ_j‖γ̂_j‖₁`. Rows are solved in parallel; output order
/// is by asset index.
pub fn nodewise_rows(y: &DMatrix<f64>, grid: &LambdaGrid) -> Result<Vec<NodewiseRow>> {
    let (n, p) = y.shape();
    if n < 3 || p < 2 {
        return Err(Error::Dimension(format!(
            "nodewise regression needs n >= 3 and p >= 2, got n={n} p={p}"
        )));
    }
    let second_moment = y.tr_mul(y) / n as f64;
    check_columns(&second_moment)?;
    (0..p)
        .into_par_iter()
        .map(|j| {
            let problem = node_problem(&second_moment, j, n);
            let (lambda, sol) = gic_select(&problem, grid, p, GicVariant::Naive)?;
            let tau_sq = problem.mean_squared_residual(&sol.coefficients) + lambda * sol.l1_norm();
            if !(tau_sq > 0.0) {
                return Err(Error::NonPositiveTau {
                    row: j,
                    value: tau_sq,
                });
            }
            Ok(build_row(j, p, &sol.coefficients, tau_sq, lambda))
        })
        .collect()
}

/// Naive nodewise precision on demeaned n×p returns, symmetrized.
pub fn nodewise_precision(y: &DMatrix<f64>, grid: &LambdaGrid) -> Result<CovarianceEstimate> {
    require_demeaned(y)?;
    let rows = nodewise_rows(y, grid)?;
    let theta = linalg::symmetrize(&stack_rows(&rows));
    let mean_lambda = rows.iter().map(|r| r.lambda).sum::<f64>() / rows.len() as f64;
    let mut est =
        CovarianceEstimate::new("NW", None, theta).with_tuning("mean_lambda", mean_lambda);
    for r in &rows {
        est = est.with_tuning(format!("lambda_{:04}", r.j), r.lambda);
    }
    Ok(est)
}

/// Shared λ for the residual variant: the grid point minimizing the residual
/// GIC summed over all rows. Returns the λ and the per-row solutions there.
fn shared_lambda_rows(
    problems: &[GramProblem],
    grid: &LambdaGrid,
    p: usize,
) -> Result<(f64, Vec<LassoSolution>)> {
    let lambda_max = problems
        .iter()
        .map(|pr| pr.lambda_max())
        .fold(0.0, f64::max);
    let lambdas = grid.resolve(lambda_max)?;
    let mut warm: Vec<Option<DVector<f64>>> = vec![None; problems.len()];
    let mut best: Option<(f64, f64, Vec<LassoSolution>)> = None;
    for lambda in lambdas {
        let sols: Vec<LassoSolution> = problems
            .par_iter()
            .zip(warm.par_iter())
            .map(|(pr, w)| pr.solve(lambda, w.as_ref()))
            .collect::<Result<_>>()?;
        let score: f64 = problems
            .iter()
            .zip(&sols)
            .map(|(pr, s)| GicVariant::Residual.score(pr, s, p))
            .sum();
        for (w, s) in warm.iter_mut().zip(&sols) {
            *w = Some(s.coefficients.clone());
        }
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, lambda, sols));
        }
    }
    let (_, lambda, sols) = best.expect("grid is nonempty");
    Ok((lambda, sols))
}

/// Residual nodewise precision on n×p returns and K×n observed factors.
///
/// Nodewise regressions run on OLS residuals with one shared λ;
/// `τ̂_j² = û_j'(û_j − Û_{−j}γ̂_j)/n`. The factor part is added back as
/// `Ω̂ − Ω̂B̂[Σ̂_f⁻¹ + B̂'Ω̂_sym B̂]⁻¹B̂'Ω̂`, then symmetrized. No covariance is
/// produced.
pub fn residual_nodewise_precision(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    grid: &LambdaGrid,
) -> Result<CovarianceEstimate> {
    let (n, p) = y.shape();
    if n < 3 || p < 2 {
        return Err(Error::Dimension(format!(
            "nodewise regression needs n >= 3 and p >= 2, got n={n} p={p}"
        )));
    }
    let fit = ols_factor_fit(y, x)?;
    let u = &fit.residuals;
    let second_moment = u.tr_mul(u) / n as f64;
    check_columns(&second_moment)?;
    let problems: Vec<GramProblem> = (0..p).map(|j| node_problem(&second_moment, j, n)).collect();
    let (lambda, sols) = shared_lambda_rows(&problems, grid, p)?;

    let rows: Vec<NodewiseRow> = problems
        .iter()
        .zip(&sols)
        .enumerate()
        .map(|(j, (pr, sol))| {
            let tau_sq = pr.yy - pr.xty.dot(&sol.coefficients);
            if !(tau_sq > 0.0) {
                return Err(Error::NonPositiveTau {
                    row: j,
                    value: tau_sq,
                });
            }
            Ok(build_row(j, p, &sol.coefficients, tau_sq, lambda))
        })
        .collect::<Result<_>>()?;
    let omega = stack_rows(&rows);
    let omega_sym = linalg::symmetrize(&omega);
    let factor_precision = linalg::invert_checked(&fit.factor_cov, "factor covariance")?;
    let gamma = linalg::smw_mixed(&omega, &omega_sym, &fit.loadings, &factor_precision)?;
    Ok(
        CovarianceEstimate::new("RNW", None, linalg::symmetrize(&gamma))
            .with_tuning("lambda", lambda)
            .with_tuning("k", x.nrows() as f64),
    )
}
