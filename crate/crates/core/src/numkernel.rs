//! Dense matrix kernels shared by every other module: norms, definiteness
//! classification, discrete Lyapunov solves and the matrix exponential.
//!
//! Everything here is a pure function of its arguments. Symmetric results
//! are re-symmetrized after each update so that definiteness tests do not
//! trip over rounding drift.

use nalgebra::{DMatrix, Schur, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

const EIGEN_MAX_ITERS: usize = 10_000;

/// Convergence controls for the iterative kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_iters: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-9,
            max_iters: 10_000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64, max_iters: usize) -> Result<Self> {
        if !(abs >= 0.0 && rel >= 0.0) || abs + rel <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance abs={abs} rel={rel}"
            )));
        }
        if max_iters == 0 {
            return Err(Error::InvalidConfig(
                "tolerance max_iters must be >= 1".into(),
            ));
        }
        Ok(Tolerance {
            abs,
            rel,
            max_iters,
        })
    }

    /// `abs + rel * scale`
    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemiDefinite,
    Indefinite,
}

pub(crate) fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalFailure(format!(
            "{what} has non-finite entries"
        )))
    }
}

/// `(M + M') / 2`
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    let n = ensure_square(m)?;
    ensure_finite(m, "spectral_radius input")?;
    if n == 1 {
        return Ok(m[(0, 0)].abs());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITERS)
        .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Largest singular value.
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    ensure_finite(m, "operator_norm input")?;
    if m.nrows() == 1 || m.ncols() == 1 {
        return Ok(m.norm());
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, EIGEN_MAX_ITERS)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    Ok(svd.singular_values.iter().copied().fold(0.0, f64::max))
}

/// Eigen-decomposition of the symmetric part of `m`.
pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    ensure_square(m)?;
    ensure_finite(m, "symmetric eigen input")?;
    SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, EIGEN_MAX_ITERS)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigen iteration did not converge".into()))
}

/// (smallest, largest) eigenvalue of a symmetric matrix.
pub fn eigen_extremes(m: &Matrix) -> Result<(f64, f64)> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return Ok((m[(0, 0)], m[(0, 0)]));
    }
    let eig = symmetric_eigen(m)?;
    let lo = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

pub fn min_eigenvalue(m: &Matrix) -> Result<f64> {
    eigen_extremes(m).map(|(lo, _)| lo)
}

pub fn max_eigenvalue(m: &Matrix) -> Result<f64> {
    eigen_extremes(m).map(|(_, hi)| hi)
}

/// Classifies a symmetric matrix by its smallest eigenvalue against `±tol`.
pub fn definiteness(m: &Matrix, tol: f64) -> Result<Definiteness> {
    ensure_square(m)?;
    ensure_finite(m, "definiteness input")?;
    let asymmetry = (m - m.transpose()).norm();
    if asymmetry > tol * m.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::AsymmetricInput { asymmetry });
    }
    let lo = min_eigenvalue(m)?;
    Ok(if lo > tol {
        Definiteness::PositiveDefinite
    } else if lo >= -tol {
        Definiteness::PositiveSemiDefinite
    } else {
        Definiteness::Indefinite
    })
}

/// `P^exponent` for symmetric PSD `P`, with eigenvalues floored at `floor`
/// before exponentiation.
pub fn symmetric_power(p: &Matrix, exponent: f64, floor: f64) -> Result<Matrix> {
    let eig = symmetric_eigen(p)?;
    let vals = eig.eigenvalues.map(|l| l.max(floor).powf(exponent));
    let v = &eig.eigenvectors;
    Ok(symmetrize(
        &(v * Matrix::from_diagonal(&vals) * v.transpose()),
    ))
}

fn doubling_sum(f: &Matrix, v: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let mut x = symmetrize(v);
    let mut g = f.clone();
    let max_doublings = tol.max_iters.min(256);
    for _ in 0..max_doublings {
        let term = symmetrize(&(g.transpose() * &x * &g));
        x += &term;
        let scale = x.norm();
        if term.norm() <= tol.threshold(scale) * 1e-3 {
            return Ok(x);
        }
        g = &g * &g;
        if !g.iter().all(|e| e.is_finite()) {
            return Err(Error::NumericalFailure(
                "doubling iterate overflowed".into(),
            ));
        }
    }
    Err(Error::NumericalFailure(
        "Lyapunov doubling did not converge".into(),
    ))
}

/// Solves `F' X F - X = -V` for stable `F` by Smith doubling, followed by
/// residual-correction passes.
pub fn solve_discrete_lyapunov(f: &Matrix, v: &Matrix) -> Result<Matrix> {
    solve_discrete_lyapunov_with(f, v, &Tolerance::default())
}

pub fn solve_discrete_lyapunov_with(f: &Matrix, v: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let n = ensure_square(f)?;
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov: F is {n}x{n}, V is {}x{}",
            v.nrows(),
            v.ncols()
        )));
    }
    ensure_finite(v, "Lyapunov right-hand side")?;
    let rho = spectral_radius(f)?;
    if rho >= 1.0 {
        return Err(Error::UnstableF(rho));
    }
    let mut x = doubling_sum(f, v, tol)?;
    let target = 1e-9 * v.norm().max(1.0);
    let mut residual = lyapunov_residual(f, &x, v);
    for _ in 0..3 {
        if residual.norm() <= 1e-3 * target {
            break;
        }
        // the correction solves the same equation with the (indefinite) residual
        let correction = doubling_sum(f, &residual, tol)?;
        x = symmetrize(&(x + correction));
        residual = lyapunov_residual(f, &x, v);
    }
    let r = residual.norm();
    if r > target {
        return Err(Error::NumericalFailure(format!(
            "Lyapunov residual {r:.3e} above {target:.3e}"
        )));
    }
    Ok(x)
}

/// `F' X F - X + V`
pub fn lyapunov_residual(f: &Matrix, x: &Matrix, v: &Matrix) -> Matrix {
    symmetrize(&(f.transpose() * x * f - x + v))
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(M)` by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exponential(m: &Matrix) -> Result<Matrix> {
    let n = ensure_square(m)?;
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Overflow);
    }
    let norm = one_norm(m);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::Overflow);
    }
    let a = m * 2f64.powi(-squarings);
    let ident = Matrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];
    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::NumericalFailure("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::close;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol * (1.0 + b.abs())
        }
    }

    #[test]
    fn spectral_radius_trivial_cases() {
        let nil = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -0.9]));
        assert!(close(spectral_radius(&d).unwrap(), 0.9, 1e-14));
        assert!(matches!(
            spectral_radius(&Matrix::zeros(2, 3)),
            Err(Error::NonSquare { .. })
        ));
    }

    #[test]
    fn operator_norm_trivial_cases() {
        assert!(close(
            operator_norm(&Matrix::identity(3, 3)).unwrap(),
            1.0,
            1e-14
        ));
        let m = Matrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert!(close(operator_norm(&m).unwrap(), 2.0, 1e-14));
    }

    #[test]
    fn definiteness_classes() {
        let diag = |a, b| Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a, b]));
        assert_eq!(
            definiteness(&Matrix::identity(2, 2), 1e-12).unwrap(),
            Definiteness::PositiveDefinite
        );
        assert_eq!(
            definiteness(&diag(1.0, 0.0), 1e-12).unwrap(),
            Definiteness::PositiveSemiDefinite
        );
        assert_eq!(
            definiteness(&diag(1.0, -1.0), 1e-12).unwrap(),
            Definiteness::Indefinite
        );
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            definiteness(&asym, 1e-12),
            Err(Error::AsymmetricInput { .. })
        ));
    }

    #[test]
    fn lyapunov_trivial_cases() {
        let x = solve_discrete_lyapunov(&Matrix::zeros(2, 2), &Matrix::identity(2, 2)).unwrap();
        assert!((x - Matrix::identity(2, 2)).norm() < 1e-14);
        let x = solve_discrete_lyapunov(
            &Matrix::from_element(1, 1, 0.5),
            &Matrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert!(close(x[(0, 0)], 4.0 / 3.0, 1e-13));
        let unstable = Matrix::from_element(1, 1, 1.0);
        assert!(matches!(
            solve_discrete_lyapunov(&unstable, &Matrix::from_element(1, 1, 1.0)),
            Err(Error::UnstableF(_))
        ));
    }

    #[test]
    fn lyapunov_near_unit_circle() {
        let f = Matrix::from_row_slice(2, 2, &[0.99, 0.5, 0.0, 0.98]);
        let v = Matrix::identity(2, 2);
        let x = solve_discrete_lyapunov(&f, &v).unwrap();
        assert!(x.norm() > 1e4);
        assert!(lyapunov_residual(&f, &x, &v).norm() <= 1e-9);
        // beyond double precision the residual contract cannot be met
        let f = Matrix::from_row_slice(2, 2, &[0.999, 0.5, 0.0, 0.998]);
        assert!(matches!(
            solve_discrete_lyapunov(&f, &v),
            Err(Error::NumericalFailure(_))
        ));
    }

    #[test]
    fn exponential_trivial_cases() {
        let e = matrix_exponential(&Matrix::zeros(3, 3)).unwrap();
        assert!((e - Matrix::identity(3, 3)).norm() < 1e-15);
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2f64.ln(), 0.0]));
        let e = matrix_exponential(&d).unwrap();
        assert!(close(e[(0, 0)], 2.0, 1e-14) && close(e[(1, 1)], 1.0, 1e-14));
        let nil = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exponential(&nil).unwrap();
        assert!((e - (Matrix::identity(2, 2) + nil)).norm() < 1e-15);
    }

    #[test]
    fn exponential_overflow() {
        let big = Matrix::from_element(1, 1, 1e6);
        assert!(matches!(matrix_exponential(&big), Err(Error::Overflow)));
    }

    #[test]
    fn symmetric_power_inverts() {
        let p = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let half = symmetric_power(&p, 0.5, 1e-12).unwrap();
        let inv_half = symmetric_power(&p, -0.5, 1e-12).unwrap();
        assert!((&half * &half - &p).norm() < 1e-12);
        assert!((&half * &inv_half - Matrix::identity(2, 2)).norm() < 1e-12);
    }
}
