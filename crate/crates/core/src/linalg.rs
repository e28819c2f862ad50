//! Dense numerical kernels shared by every estimator.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Data panels are stored T×p (rows are
//! periods), so the sample second-moment matrix is `Y'Y / T`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetry tolerance used when validating inputs to [`spectral`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Condition number above which a small dense solve is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Eigen-decomposition `S = U diag(λ) U'` with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Column `i` is the unit eigenvector paired with `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(f(λ)) U'`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let values: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.with_eigenvalues(&values)
    }

    /// `U diag(values) U'` for a replacement spectrum in the same order.
    pub fn with_eigenvalues(&self, values: &[f64]) -> DMatrix<f64> {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (mut col, &v) in scaled.column_iter_mut().zip(values) {
            col *= v;
        }
        symmetrize(&(scaled * u.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.with_eigenvalues(self.eigenvalues.as_slice())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn column_means(y: &DMatrix<f64>) -> DVector<f64> {
    let t = y.nrows().max(1) as f64;
    DVector::from_iterator(y.ncols(), y.column_iter().map(|c| c.sum() / t))
}

pub fn demean_columns(y: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(y);
    let mut out = y.clone();
    for (mut col, m) in out.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-m);
    }
    out
}

/// `Y'Y / T`, optionally after subtracting column means.
pub fn sample_covariance(y: &DMatrix<f64>, demean: bool) -> Result<DMatrix<f64>> {
    let t = y.nrows();
    if t < 2 {
        return Err(Error::InsufficientHistory {
            required: 1,
            actual: t,
        });
    }
    if y.ncols() == 0 {
        return Err(Error::Dimension("panel has no columns".into()));
    }
    let centered;
    let y = if demean {
        centered = demean_columns(y);
        &centered
    } else {
        y
    };
    Ok(symmetrize(&(y.tr_mul(y) / t as f64)))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Max-norm distance `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn require_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Symmetric eigen-decomposition with eigenvalues sorted ascending.
pub fn spectral(s: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    require_square(s, "spectral input")?;
    let asym = max_asymmetry(s);
    if asym > SYMMETRY_TOL * max_abs(s).max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(s.clone());
    let n = s.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Exactly `(M + M') / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
///
/// There is deliberately no pseudo-inverse fallback: a failed factorization is
/// reported as [`Error::NotPositiveDefinite`].
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_square(m, "matrix to invert")?;
    let chol = m.clone().cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite(format!(
            "Cholesky factorization failed for {}x{} matrix",
            m.nrows(),
            m.ncols()
        ))
    })?;
    Ok(symmetrize(&chol.inverse()))
}

/// 2-norm condition number via singular values; `inf` for exactly singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0_f64, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a small general square matrix, rejecting ill-conditioned input.
pub fn invert_checked(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    require_square(m, context)?;
    let condition = condition_number(m);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular {
            context: context.to_string(),
            condition,
        });
    }
    m.clone().try_inverse().ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition,
    })
}

/// Woodbury assembly `Σ⁻¹ = Ω − ΩB[Σ_f⁻¹ + B'ΩB]⁻¹B'Ω` for a symmetric `Ω`.
pub fn smw_precision(
    omega: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    sigma_f_inv: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    require_square(omega, "omega")?;
    let asym = max_asymmetry(omega);
    if asym > SYMMETRY_TOL * max_abs(omega).max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    smw_mixed(omega, omega, loadings, sigma_f_inv).map(|m| symmetrize(&m))
}

/// Woodbury assembly where the outer factors and the inner bracket use
/// different versions of the error precision: `Ω − ΩB[Σ_f⁻¹ + B'Ω_in B]⁻¹B'Ω`.
/// The result is not symmetrized.
pub fn smw_mixed(
    omega: &DMatrix<f64>,
    omega_inner: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    sigma_f_inv: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let p = omega.nrows();
    let k = loadings.ncols();
    if loadings.nrows() != p || omega_inner.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "loadings are {}x{}, omega is {p}x{p}",
            loadings.nrows(),
            k
        )));
    }
    if sigma_f_inv.shape() != (k, k) {
        return Err(Error::Dimension(format!(
            "factor precision must be {k}x{k}, got {}x{}",
            sigma_f_inv.nrows(),
            sigma_f_inv.ncols()
        )));
    }
    if k == 0 {
        return Ok(omega.clone());
    }
    let inner = sigma_f_inv + loadings.transpose() * omega_inner * loadings;
    let inner_inv = invert_checked(&inner, "Woodbury inner matrix")?;
    let left = omega * loadings;
    let right = loadings.transpose() * omega;
    Ok(omega - left * inner_inv * right)
}

/// Symmetric square root and inverse square root of an SPD matrix.
pub fn spd_sqrt_pair(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = spectral(m)?;
    let min = eig.min_eigenvalue();
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "minimum eigenvalue {min:e}"
        )));
    }
    Ok((eig.map(f64::sqrt), eig.map(|l| 1.0 / l.sqrt())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn sample_covariance_hand_case() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let s = sample_covariance(&y, false).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
    }

    #[test]
    fn constant_column_demeaned_is_zero() {
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 4.0, 6.0, 4.0]);
        let s = sample_covariance(&y, true).unwrap();
        assert_eq!(s[(1, 1)], 0.0);
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(1, 0)], 0.0);
    }

    #[test]
    fn sample_covariance_singular_when_p_exceeds_t() {
        let y = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 0.5, 1.1, 0.4, -0.7]);
        let s = sample_covariance(&y, false).unwrap();
        let eig = spectral(&s).unwrap();
        let tol = 1e-8 * eig.max_eigenvalue();
        let nonzero = eig.eigenvalues.iter().filter(|l| l.abs() > tol).count();
        assert!(nonzero <= 2);
        assert!(eig.min_eigenvalue().abs() <= tol);
    }

    #[test]
    fn spectral_of_identity_and_permuted_diagonal() {
        let eig = spectral(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let eig = spectral(&d).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[1.0, 2.0, 3.0]);
        // eigenvector for 1.0 is ±e2, for 2.0 ±e3, for 3.0 ±e1
        assert!((eig.eigenvectors[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((eig.eigenvectors[(2, 1)].abs() - 1.0).abs() < 1e-12);
        assert!((eig.eigenvectors[(0, 2)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_reconstructs_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_spd(10, &mut rng);
        let eig = spectral(&s).unwrap();
        assert!(max_abs_diff(&eig.reconstruct(), &s) <= 1e-8);
        let u = &eig.eigenvectors;
        assert!(max_abs_diff(&(u.transpose() * u), &DMatrix::identity(10, 10)) <= 1e-8);
        assert!(eig.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn spectral_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spectral(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn smw_with_zero_loadings_returns_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let omega = random_spd(5, &mut rng);
        let b = DMatrix::zeros(5, 2);
        let out = smw_precision(&omega, &b, &DMatrix::identity(2, 2)).unwrap();
        assert!(max_abs_diff(&out, &omega) < 1e-14);
    }

    #[test]
    fn smw_identity_loadings_gives_half_identity() {
        let p = 4;
        let out = smw_precision(
            &DMatrix::identity(p, p),
            &DMatrix::identity(p, p),
            &DMatrix::identity(p, p),
        )
        .unwrap();
        assert!(max_abs_diff(&out, &(DMatrix::identity(p, p) * 0.5)) < 1e-14);
    }

    #[test]
    fn smw_matches_direct_inverse_single_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sigma_u = random_spd(4, &mut rng);
        let sigma_f = random_spd(1, &mut rng);
        let b = DMatrix::from_fn(4, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = &b * &sigma_f * b.transpose() + &sigma_u;
        let direct = spd_inverse(&sigma).unwrap();
        let smw = smw_precision(
            &spd_inverse(&sigma_u).unwrap(),
            &b,
            &spd_inverse(&sigma_f).unwrap(),
        )
        .unwrap();
        assert!(max_abs_diff(&direct, &smw) <= 1e-8);
    }

    #[test]
    fn smw_singular_inner_reports_condition() {
        let omega = DMatrix::identity(3, 3);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        // Σ_f⁻¹ chosen so the inner bracket is exactly singular.
        let sf_inv = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, -1.0, -1.0]);
        match smw_precision(&omega, &b, &sf_inv) {
            Err(Error::Singular { condition, .. }) => assert!(condition > MAX_CONDITION),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn symmetrize_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        let s = symmetrize(&m);
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(symmetrize(&s), s);
    }

    #[test]
    fn spd_inverse_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            spd_inverse(&m),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn sqrt_pair_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_spd(6, &mut rng);
        let (root, inv_root) = spd_sqrt_pair(&m).unwrap();
        let id = &inv_root * &m * &inv_root;
        assert!(max_abs_diff(&id, &DMatrix::identity(6, 6)) < 1e-8);
        assert!(max_abs_diff(&(&root * &root), &m) < 1e-8);
    }
}
