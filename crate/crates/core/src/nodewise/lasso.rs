//! Lasso by coordinate descent on the Gram matrix, with objective
//! `(1/n)‖y − Xγ‖² + 2λ‖γ‖₁`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 1000;
pub const TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub coefficients: DVector<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub active_set: Vec<usize>,
    pub sweeps: usize,
    pub converged: bool,
}

impl LassoSolution {
    pub fn l1_norm(&self) -> f64 {
        self.coefficients.lp_norm(1)
    }
}

/// Sufficient statistics of one regression: `X'X/n`, `X'y/n`, `y'y/n`.
#[derive(Debug, Clone)]
pub struct GramProblem {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yy: f64,
    pub n: usize,
}

impl GramProblem {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "design has {n} rows, response has {}",
                y.len()
            )));
        }
        if n == 0 {
            return Err(Error::Dimension("empty design".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite value in lasso input".into(),
            ));
        }
        let nf = n as f64;
        Ok(Self {
            gram: x.tr_mul(x) / nf,
            xty: x.tr_mul(y) / nf,
            yy: y.norm_squared() / nf,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    /// Smallest λ with an all-zero solution, `max_k |x_k'y/n|`.
    pub fn lambda_max(&self) -> f64 {
        self.xty.amax()
    }

    /// `(1/n)‖y − Xγ‖²`.
    pub fn mean_squared_residual(&self, gamma: &DVector<f64>) -> f64 {
        (self.yy - 2.0 * gamma.dot(&self.xty) + gamma.dot(&(&self.gram * gamma))).max(0.0)
    }

    pub fn objective(&self, gamma: &DVector<f64>, lambda: f64) -> f64 {
        self.mean_squared_residual(gamma) + 2.0 * lambda * gamma.lp_norm(1)
    }

    pub fn solve(&self, lambda: f64, warm: Option<&DVector<f64>>) -> Result<LassoSolution> {
        self.solve_traced(lambda, warm, None)
    }

    /// Coordinate update of `gamma[k]` given `corr_k = x_k'(y − Xγ)/n`; returns the change.
    fn update(&self, k: usize, gamma: &mut DVector<f64>, corr_k: f64, lambda: f64) -> f64 {
        let a = self.gram[(k, k)];
        let old = gamma[k];
        let new = if a > 0.0 {
            soft_threshold(corr_k + a * old, lambda) / a
        } else {
            0.0
        };
        gamma[k] = new;
        new - old
    }

    pub(crate) fn solve_traced(
        &self,
        lambda: f64,
        warm: Option<&DVector<f64>>,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<LassoSolution> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        let m = self.dim();
        let mut gamma = match warm {
            Some(w) if w.len() == m => w.clone(),
            Some(w) => {
                return Err(Error::Dimension(format!(
                    "warm start has length {}, expected {m}",
                    w.len()
                )));
            }
            None => DVector::zeros(m),
        };
        // corr = X'(y − Xγ)/n
        let mut corr = &self.xty - &self.gram * &gamma;
        if let Some(t) = trace.as_deref_mut() {
            t.push(self.objective(&gamma, lambda));
        }
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            let mut max_change: f64 = 0.0;
            for k in 0..m {
                let delta = self.update(k, &mut gamma, corr[k], lambda);
                if delta != 0.0 {
                    corr.axpy(-delta, &self.gram.column(k), 1.0);
                    max_change = max_change.max(delta.abs());
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(&gamma, lambda));
            }
            if max_change < TOLERANCE {
                converged = true;
                break;
            }
        }
        let active_set = (0..m).filter(|&k| gamma[k] != 0.0).collect();
        Ok(LassoSolution {
            objective: self.objective(&gamma, lambda),
            coefficients: gamma,
            lambda,
            active_set,
            sweeps,
            converged,
        })
    }
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Solve `min (1/n)‖y − Xγ‖² + 2λ‖γ‖₁` from a zero start.
pub fn lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<LassoSolution> {
    GramProblem::new(x, y)?.solve(lambda, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn instance(n: usize, m: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = DVector::from_fn(m, |k, _| if k < 2 { 1.5 - k as f64 } else { 0.0 });
        let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &x * beta + noise;
        (x, y)
    }

    #[test]
    fn kill_zone_gives_zero() {
        let (x, y) = instance(40, 6, 1);
        let prob = GramProblem::new(&x, &y).unwrap();
        let sol = prob.solve(prob.lambda_max(), None).unwrap();
        assert!(sol.active_set.is_empty());
        let sol = prob.solve(prob.lambda_max() * 0.99, None).unwrap();
        assert_eq!(sol.active_set.len(), 1);
    }

    #[test]
    fn orthonormal_design_is_soft_thresholding() {
        // columns scaled so that X'X/n = I
        let n = 8;
        let h = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, -1.0],
            [1.0, -1.0, -1.0],
        ];
        let x = DMatrix::from_fn(n, 3, |r, c| h[r % 4][c]);
        let g = x.tr_mul(&x) / n as f64;
        assert!((g - DMatrix::identity(3, 3)).amax() < 1e-15);
        let y = DVector::from_vec(vec![3.0, -1.0, 0.5, 2.0, 1.0, 0.0, -2.0, 0.7]);
        let ols = x.tr_mul(&y) / n as f64;
        let lambda = 0.4;
        let sol = lasso(&x, &y, lambda).unwrap();
        for k in 0..3 {
            assert!((sol.coefficients[k] - soft_threshold(ols[k], lambda)).abs() < 1e-8);
        }
    }

    fn kkt_violation(prob: &GramProblem, sol: &LassoSolution) -> f64 {
        let corr = &prob.xty - &prob.gram * &sol.coefficients;
        let mut worst: f64 = 0.0;
        for k in 0..prob.dim() {
            let g = sol.coefficients[k];
            let v = if g != 0.0 {
                (corr[k] - sol.lambda * g.signum()).abs()
            } else {
                (corr[k].abs() - sol.lambda).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    }

    #[test]
    fn kkt_holds_on_random_instances() {
        for seed in 0..25 {
            let (x, y) = instance(60, 12, 100 + seed);
            let prob = GramProblem::new(&x, &y).unwrap();
            for frac in [0.05, 0.3, 0.8] {
                let sol = prob.solve(frac * prob.lambda_max(), None).unwrap();
                assert!(sol.converged);
                assert!(kkt_violation(&prob, &sol) < 1e-6, "seed {seed} frac {frac}");
            }
        }
    }

    /// Exhaustive search over sign patterns in {−,0,+}^m.
    pub(crate) fn brute_force(prob: &GramProblem, lambda: f64) -> f64 {
        let m = prob.dim();
        let mut best = prob.objective(&DVector::zeros(m), lambda);
        for code in 0..3usize.pow(m as u32) {
            let mut signs = vec![0.0; m];
            let mut c = code;
            for s in signs.iter_mut() {
                *s = [0.0, 1.0, -1.0][c % 3];
                c /= 3;
            }
            let support: Vec<usize> = (0..m).filter(|&k| signs[k] != 0.0).collect();
            if support.is_empty() {
                continue;
            }
            let g = prob.gram.select_rows(&support).select_columns(&support);
            let rhs = DVector::from_fn(support.len(), |i, _| {
                prob.xty[support[i]] - lambda * signs[support[i]]
            });
            let Some(sol) = g.clone().lu().solve(&rhs) else {
                continue;
            };
            if support
                .iter()
                .enumerate()
                .any(|(i, &k)| sol[i] * signs[k] <= 0.0)
            {
                continue;
            }
            let mut gamma = DVector::zeros(m);
            for (i, &k) in support.iter().enumerate() {
                gamma[k] = sol[i];
            }
            best = best.min(prob.objective(&gamma, lambda));
        }
        best
    }

    #[test]
    fn matches_brute_force_on_three_variables() {
        for seed in 0..10 {
            let (x, y) = instance(50, 3, 200 + seed);
            let prob = GramProblem::new(&x, &y).unwrap();
            for frac in [0.02, 0.2, 0.5, 0.9] {
                let lambda = frac * prob.lambda_max();
                let sol = prob.solve(lambda, None).unwrap();
                let oracle = brute_force(&prob, lambda);
                assert!(
                    (sol.objective - oracle).abs() < 1e-6,
                    "seed {seed}: {} vs {oracle}",
                    sol.objective
                );
            }
        }
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let (x, y) = instance(30, 25, 7);
        let prob = GramProblem::new(&x, &y).unwrap();
        let mut trace = Vec::new();
        prob.solve_traced(0.02 * prob.lambda_max(), None, Some(&mut trace))
            .unwrap();
        assert!(trace.len() > 2);
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn rejects_bad_lambda_and_shapes() {
        let (x, y) = instance(10, 2, 8);
        assert!(lasso(&x, &y, -1.0).is_err());
        assert!(lasso(&x, &y.rows(0, 5).into_owned(), 0.1).is_err());
    }
}
