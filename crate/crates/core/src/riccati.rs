//! The gamma-modified Riccati machinery.
//!
//! For a gain `K` with `F = A - BK`, the policy equation is
//!
//! ```text
//! P = F' P~ F + Q + K'RK,   P~ = P + PD (gamma^2 I - D'PD)^-1 D'P
//! ```
//!
//! which is implicit in `P`. It is solved by fixed-point iteration started at
//! the plain Lyapunov solution (`P~` replaced by `P`); the iterates increase
//! monotonically and stay bounded exactly when `K` attenuates disturbances
//! below `gamma`, so loss of `gamma^2 I - D'PD > 0` or blow-up flags an
//! invalid gain. Policy improvement is `K+ = (R + B'P~B)^-1 B'P~A`.

use nalgebra::Cholesky;

use crate::error::{Error, InitFailure, Result};
use crate::numkernel::{
    eigen_extremes, ensure_finite, min_eigenvalue, operator_norm, solve_discrete_lyapunov,
    spectral_radius, symmetric_power, symmetrize, Matrix,
};
use crate::sysmodel::{closed_loop, is_valid_controller, Gain, LtiSystem};

/// A solution of the policy equation together with its gamma-feasibility
/// margin, the smallest eigenvalue of `gamma^2 I - D'PD`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: Matrix,
    pub gamma: f64,
    pub feasibility_margin: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions {
    /// relative change that ends the fixed-point iteration
    pub rel_tol: f64,
    pub max_iters: usize,
    /// `gamma^2 I - D'PD` must keep its smallest eigenvalue above this
    pub margin_floor: f64,
    /// iterates beyond this norm are treated as diverging
    pub blowup: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        RiccatiOptions {
            rel_tol: 1e-13,
            max_iters: 10_000,
            margin_floor: 1e-12,
            blowup: 1e12,
        }
    }
}

fn gamma_block(p: &Matrix, d: &Matrix, gamma: f64) -> Matrix {
    let k = d.ncols();
    symmetrize(&(Matrix::identity(k, k) * (gamma * gamma) - d.transpose() * p * d))
}

fn margin_of(p: &Matrix, d: &Matrix, gamma: f64) -> Result<f64> {
    min_eigenvalue(&gamma_block(p, d, gamma))
}

fn ptilde_checked(p: &Matrix, d: &Matrix, gamma: f64, floor: f64) -> Result<Matrix> {
    let block = gamma_block(p, d, gamma);
    let k = block.nrows();
    let above_floor =
        floor <= 0.0 || Cholesky::new(&block - Matrix::identity(k, k) * floor).is_some();
    let chol = if above_floor {
        Cholesky::new(block.clone())
    } else {
        None
    };
    let Some(chol) = chol else {
        let margin = min_eigenvalue(&block).unwrap_or(f64::NEG_INFINITY);
        return Err(Error::GammaInfeasible { margin });
    };
    let pd = p * d;
    let correction = &pd * chol.solve(&pd.transpose());
    Ok(symmetrize(&(p + correction)))
}

/// `P + PD (gamma^2 I - D'PD)^-1 D'P`
pub fn ptilde(p: &Matrix, d: &Matrix, gamma: f64) -> Result<Matrix> {
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveParameter("gamma"));
    }
    if p.nrows() != p.ncols() || d.nrows() != p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "ptilde: P is {}x{}, D is {}x{}",
            p.nrows(),
            p.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    ptilde_checked(p, d, gamma, 0.0)
}

fn check_cost_dims(sys: &LtiSystem, qbar: &Matrix, rbar: &Matrix) -> Result<()> {
    let (n, m) = (sys.states(), sys.inputs());
    if qbar.shape() != (n, n) || rbar.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "cost matrices are {:?} and {:?}, plant needs ({n}, {n}) and ({m}, {m})",
            qbar.shape(),
            rbar.shape()
        )));
    }
    ensure_finite(qbar, "Q")?;
    ensure_finite(rbar, "R")
}

/// Solves the policy equation for the gain `k` with cost weights
/// `(qbar, rbar)`.
pub fn solve_policy_riccati(
    sys: &LtiSystem,
    k: &Gain,
    qbar: &Matrix,
    rbar: &Matrix,
    gamma: f64,
) -> Result<RiccatiSolution> {
    solve_policy_riccati_with(sys, k, qbar, rbar, gamma, &RiccatiOptions::default())
}

pub fn solve_policy_riccati_with(
    sys: &LtiSystem,
    k: &Gain,
    qbar: &Matrix,
    rbar: &Matrix,
    gamma: f64,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution> {
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveParameter("gamma"));
    }
    check_cost_dims(sys, qbar, rbar)?;
    let (f, _) = closed_loop(sys, k)?;
    let rho = spectral_radius(&f)?;
    if rho >= 1.0 {
        return Err(Error::UnstableGain(rho));
    }
    let kk = k.matrix();
    let v = symmetrize(&(qbar + kk.transpose() * rbar * kk));
    let ft = f.transpose();
    let d = sys.d();
    let mut p = solve_discrete_lyapunov(&f, &v)?;
    let mut change = f64::INFINITY;
    for iter in 1..=opts.max_iters {
        let pt = ptilde_checked(&p, d, gamma, opts.margin_floor)?;
        let next = symmetrize(&(&ft * pt * &f + &v));
        change = (&next - &p).norm();
        let scale = p.norm().max(1.0);
        p = next;
        if !(p.norm() <= opts.blowup) {
            let margin = margin_of(&p, d, gamma).unwrap_or(f64::NEG_INFINITY);
            return Err(Error::GammaInfeasible { margin });
        }
        if change <= opts.rel_tol * scale {
            let pt = ptilde_checked(&p, d, gamma, opts.margin_floor)?;
            let residual = (symmetrize(&(&ft * pt * &f + &v)) - &p).norm();
            let feasibility_margin = margin_of(&p, d, gamma)?;
            return Ok(RiccatiSolution {
                p,
                gamma,
                feasibility_margin,
                residual,
                iterations: iter,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        change,
    })
}

/// `(R + B'P~B)^-1 B'P~A`
pub fn policy_improvement(sys: &LtiSystem, sol: &RiccatiSolution, rbar: &Matrix) -> Result<Gain> {
    let m = sys.inputs();
    if rbar.shape() != (m, m) || sol.p.shape() != (sys.states(), sys.states()) {
        return Err(Error::DimensionMismatch(
            "policy improvement operands".into(),
        ));
    }
    let pt = ptilde(&sol.p, sys.d(), sol.gamma)?;
    let bt_pt = sys.b().transpose() * &pt;
    let inner = symmetrize(&(rbar + &bt_pt * sys.b()));
    let chol = Cholesky::new(inner).ok_or(Error::SingularInnerMatrix)?;
    Ok(Gain(chol.solve(&(bt_pt * sys.a()))))
}

/// Alternates policy solves and improvements from `k_init` until `P`
/// settles, returning the optimal gain and its Riccati solution.
pub fn solve_stationary(
    sys: &LtiSystem,
    q: &Matrix,
    r: &Matrix,
    gamma: f64,
    k_init: &Gain,
) -> Result<(Gain, RiccatiSolution)> {
    let validity = is_valid_controller(sys, k_init, gamma)?;
    if !validity.valid {
        let why = if validity.spectral_radius >= 1.0 {
            InitFailure::SpectralRadius
        } else {
            InitFailure::HInfinity
        };
        return Err(Error::InfeasibleInit(why));
    }
    policy_iteration(sys, q, r, gamma, k_init)
}

/// Policy iteration without the frequency-domain membership test on
/// `k_init`; a feasible policy solve certifies the initial gain instead.
pub fn policy_iteration(
    sys: &LtiSystem,
    q: &Matrix,
    r: &Matrix,
    gamma: f64,
    k_init: &Gain,
) -> Result<(Gain, RiccatiSolution)> {
    const MAX_SWEEPS: usize = 500;
    let mut k = k_init.clone();
    let mut sol = match solve_policy_riccati(sys, &k, q, r, gamma) {
        Ok(sol) => sol,
        Err(Error::UnstableGain(_)) => {
            return Err(Error::InfeasibleInit(InitFailure::SpectralRadius))
        }
        Err(Error::GammaInfeasible { .. } | Error::NonConvergence { .. }) => {
            return Err(Error::InfeasibleInit(InitFailure::RiccatiFeasibility))
        }
        Err(e) => return Err(e),
    };
    let mut change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let next_k = policy_improvement(sys, &sol, r)?;
        let next = solve_policy_riccati(sys, &next_k, q, r, gamma)?;
        change = (&next.p - &sol.p).norm();
        let scale = sol.p.norm().max(1.0);
        k = next_k;
        sol = next;
        if change <= 1e-10 * scale {
            return Ok((k, sol));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_SWEEPS,
        change,
    })
}

/// A starting gain from value iteration on the modified Riccati map,
/// `P <- Q + A'P~A - A'P~B (R + B'P~B)^-1 B'P~A` from `P = Q`.
pub fn initial_gain(sys: &LtiSystem, q: &Matrix, r: &Matrix, gamma: f64) -> Result<Gain> {
    check_cost_dims(sys, q, r)?;
    let (a, b, d) = (sys.a(), sys.b(), sys.d());
    let gain_for = |pt: &Matrix| -> Result<Gain> {
        let bt_pt = b.transpose() * pt;
        let inner = symmetrize(&(r + &bt_pt * b));
        let chol = Cholesky::new(inner).ok_or(Error::SingularInnerMatrix)?;
        Ok(Gain(chol.solve(&(bt_pt * a))))
    };
    let mut p = symmetrize(q);
    let max_iters = 200_000;
    for iter in 0..max_iters {
        let pt = ptilde(&p, d, gamma)?;
        let k = gain_for(&pt)?;
        let next =
            symmetrize(&(q + a.transpose() * &pt * a - a.transpose() * &pt * b * k.matrix()));
        let change = (&next - &p).norm();
        let done = change <= 1e-13 * next.norm().max(1.0);
        p = next;
        if !(p.norm() <= 1e12) {
            return Err(Error::NonConvergence {
                iterations: iter + 1,
                change,
            });
        }
        // a stabilizing gain is enough once the iterates have mostly settled
        if done || (iter % 50 == 49 && change <= 1e-6 * p.norm().max(1.0)) {
            let k = gain_for(&ptilde(&p, d, gamma)?)?;
            let (f, _) = closed_loop(sys, &k)?;
            if spectral_radius(&f)? < 1.0 {
                return Ok(k);
            }
            if done {
                return Err(Error::UnstableGain(spectral_radius(&f)?));
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        change: f64::NAN,
    })
}

/// Practical stabilizability test: a stationary solve with identity weights
/// and `gamma = 1e9` must succeed.
pub fn check_stabilizable(sys: &LtiSystem) -> Result<Gain> {
    let q = Matrix::identity(sys.states(), sys.states());
    let r = Matrix::identity(sys.inputs(), sys.inputs());
    let gamma = 1e9;
    let k0 =
        initial_gain(sys, &q, &r, gamma).map_err(|e| Error::UnstabilizableModel(e.to_string()))?;
    let (k, _) = policy_iteration(sys, &q, &r, gamma, &k0)
        .map_err(|e| Error::UnstabilizableModel(e.to_string()))?;
    Ok(k)
}

/// `Tr(P D D')`
pub fn h2_cost_bound(sol: &RiccatiSolution, d: &Matrix) -> Result<f64> {
    if d.nrows() != sol.p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "D has {} rows, P is {}",
            d.nrows(),
            sol.p.nrows()
        )));
    }
    Ok((&sol.p * d * d.transpose()).trace())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lemma1Outcome {
    ValidByRiccati(RiccatiSolution),
    Invalid(String),
}

impl Lemma1Outcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, Lemma1Outcome::ValidByRiccati(_))
    }
}

/// Bounded-real membership test: stabilizing and the policy equation with
/// the plant's own `Q, R` has a feasible solution.
pub fn lemma1_check(sys: &LtiSystem, k: &Gain, gamma: f64) -> Lemma1Outcome {
    let run = || -> Result<RiccatiSolution> {
        let (f, _) = closed_loop(sys, k)?;
        let rho = spectral_radius(&f)?;
        if rho >= 1.0 {
            return Err(Error::UnstableGain(rho));
        }
        let sol = solve_policy_riccati(sys, k, sys.q(), sys.r(), gamma)?;
        if sol.feasibility_margin <= 0.0 {
            return Err(Error::GammaInfeasible {
                margin: sol.feasibility_margin,
            });
        }
        Ok(sol)
    };
    match run() {
        Ok(sol) => Lemma1Outcome::ValidByRiccati(sol),
        Err(e) => Lemma1Outcome::Invalid(e.to_string()),
    }
}

/// Strong-stability certificate `A - BK = H L H^-1` with `||L|| <= 1 - eps`,
/// `||K|| <= kappa` and `||H|| ||H^-1|| <= kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct S2daCertificate {
    pub kappa: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub h: Matrix,
    pub h_inv: Matrix,
    pub l: Matrix,
    /// `1 / ||H^-1||`
    pub alpha: f64,
    /// `||H||`
    pub beta: f64,
}

impl S2daCertificate {
    /// `||H_next^-1 H_self||`, the quantity bounded by `1 + eps` for
    /// sequential strong stability.
    pub fn sequential_gap(&self, next: &S2daCertificate) -> Result<f64> {
        operator_norm(&(&next.h_inv * &self.h))
    }
}

/// Builds the certificate from `P`: `kappa = sqrt(lambda_max(P) / mu)`,
/// `eps = 1 / (2 kappa^2)`, `H = P^-1/2`, `L = P^1/2 (A - BK) P^-1/2`.
/// Every invariant is checked before returning.
pub fn s2da_certificate(
    sys: &LtiSystem,
    k: &Gain,
    sol: &RiccatiSolution,
    mu: f64,
) -> Result<S2daCertificate> {
    if !(mu > 0.0) {
        return Err(Error::NonPositiveParameter("mu"));
    }
    let (f, _) = closed_loop(sys, k)?;
    let (lo, hi) = eigen_extremes(&sol.p)?;
    let floor = 1e-12;
    let kappa = (hi.max(floor) / mu).sqrt();
    let epsilon = 1.0 / (2.0 * kappa * kappa);
    let h = symmetric_power(&sol.p, -0.5, floor)?;
    let h_inv = symmetric_power(&sol.p, 0.5, floor)?;
    let l = &h_inv * &f * &h;
    let beta = 1.0 / lo.max(floor).sqrt();
    let alpha = 1.0 / hi.max(floor).sqrt();
    let cert = S2daCertificate {
        kappa,
        epsilon,
        gamma: sol.gamma,
        h,
        h_inv,
        l,
        alpha,
        beta,
    };
    let report = cert.check(&f, k)?;
    if let Some(msg) = report.failure() {
        return Err(Error::CertificateFailure(msg));
    }
    Ok(cert)
}

/// Numerical values of the four certificate invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    pub reconstruction_error: f64,
    pub reconstruction_scale: f64,
    pub l_norm: f64,
    pub k_norm: f64,
    pub condition: f64,
    pub kappa: f64,
    pub epsilon: f64,
}

impl CertificateReport {
    pub fn failure(&self) -> Option<String> {
        if self.reconstruction_error > 1e-8 * self.reconstruction_scale {
            return Some(format!(
                "A-BK != HLH^-1 (error {:.3e})",
                self.reconstruction_error
            ));
        }
        if self.l_norm > 1.0 - self.epsilon + 1e-12 {
            return Some(format!(
                "||L|| = {:.12} exceeds 1 - eps = {:.12}",
                self.l_norm,
                1.0 - self.epsilon
            ));
        }
        if self.k_norm > self.kappa * (1.0 + 1e-10) {
            return Some(format!(
                "||K|| = {:.6} exceeds kappa = {:.6}",
                self.k_norm, self.kappa
            ));
        }
        if self.condition > self.kappa * (1.0 + 1e-8) {
            return Some(format!(
                "||H|| ||H^-1|| = {:.6} exceeds kappa = {:.6}",
                self.condition, self.kappa
            ));
        }
        None
    }
}

impl S2daCertificate {
    pub fn check(&self, a_cl: &Matrix, k: &Gain) -> Result<CertificateReport> {
        let rebuilt = &self.h * &self.l * &self.h_inv;
        Ok(CertificateReport {
            reconstruction_error: (a_cl - rebuilt).amax(),
            reconstruction_scale: a_cl.amax().max(1.0),
            l_norm: operator_norm(&self.l)?,
            k_norm: operator_norm(k.matrix())?,
            condition: operator_norm(&self.h)? * operator_norm(&self.h_inv)?,
            kappa: self.kappa,
            epsilon: self.epsilon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn scalar_plant() -> LtiSystem {
        LtiSystem::new(
            m1(0.5),
            m1(1.0),
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            m1(1.0),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap()
    }

    fn sol(p: Matrix, gamma: f64) -> RiccatiSolution {
        RiccatiSolution {
            p,
            gamma,
            feasibility_margin: 1.0,
            residual: 0.0,
            iterations: 0,
        }
    }

    #[test]
    fn ptilde_examples() {
        let pt = ptilde(&m1(1.0), &m1(1.0), 2.0).unwrap();
        assert!((pt[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
        let p = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(ptilde(&p, &Matrix::zeros(2, 1), 0.7).unwrap(), p);
        assert!(matches!(
            ptilde(&m1(1.0), &m1(1.0), 0.9),
            Err(Error::GammaInfeasible { .. })
        ));
    }

    #[test]
    fn nilpotent_policy_solution() {
        let sys = scalar_plant();
        let s = solve_policy_riccati(&sys, &Gain(m1(0.5)), &m1(1.0), &m1(1.0), 10.0).unwrap();
        assert!((s.p[(0, 0)] - 1.25).abs() < 1e-14);
        assert!(s.feasibility_margin > 0.0);
    }

    #[test]
    fn infeasible_gamma_detected() {
        let sys = scalar_plant();
        let err = solve_policy_riccati(&sys, &Gain(m1(0.5)), &m1(1.0), &m1(1.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::GammaInfeasible { .. }));
        let err =
            solve_policy_riccati(&sys, &Gain(m1(-1.0)), &m1(1.0), &m1(1.0), 10.0).unwrap_err();
        assert!(matches!(err, Error::UnstableGain(_)));
    }

    #[test]
    fn improvement_examples() {
        let sys = scalar_plant();
        // p~ = 4/3 from p = 1, gamma = 2
        let k = policy_improvement(&sys, &sol(m1(1.0), 2.0), &m1(1.0)).unwrap();
        assert!((k.matrix()[(0, 0)] - 2.0 / 7.0).abs() < 1e-15);
        let no_input = LtiSystem::new(
            m1(0.5),
            m1(0.0),
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            m1(1.0),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let k = policy_improvement(&no_input, &sol(m1(1.0), 2.0), &m1(1.0)).unwrap();
        assert_eq!(k.matrix()[(0, 0)], 0.0);
        assert!(matches!(
            policy_improvement(&no_input, &sol(m1(1.0), 2.0), &m1(0.0)),
            Err(Error::SingularInnerMatrix)
        ));
    }

    #[test]
    fn stationary_with_zero_dynamics() {
        let ident = Matrix::identity(2, 2);
        let sys = LtiSystem::new(
            Matrix::zeros(2, 2),
            ident.clone(),
            Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            ident.clone(),
            Matrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let (k, s) =
            solve_stationary(&sys, &ident, &ident, 10.0, &Gain(Matrix::zeros(2, 2))).unwrap();
        assert!(k.matrix().amax() < 1e-15);
        assert!((s.p - ident).amax() < 1e-14);
    }

    #[test]
    fn stationary_rejects_bad_init() {
        let sys = scalar_plant();
        let err = solve_stationary(&sys, &m1(1.0), &m1(1.0), 10.0, &Gain(m1(-1.0))).unwrap_err();
        assert!(matches!(
            err,
            Error::InfeasibleInit(InitFailure::SpectralRadius)
        ));
        let err = solve_stationary(&sys, &m1(1.0), &m1(1.0), 0.5, &Gain(m1(0.5))).unwrap_err();
        assert!(matches!(err, Error::InfeasibleInit(InitFailure::HInfinity)));
    }

    #[test]
    fn h2_bound_examples() {
        let s = sol(Matrix::identity(2, 2), 1.0);
        assert_eq!(h2_cost_bound(&s, &Matrix::identity(2, 2)).unwrap(), 2.0);
        assert_eq!(h2_cost_bound(&s, &Matrix::zeros(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn lemma1_examples() {
        let sys = scalar_plant();
        assert!(lemma1_check(&sys, &Gain(m1(0.5)), 3.0).is_valid());
        assert!(!lemma1_check(&sys, &Gain(m1(0.5)), 0.9).is_valid());
        assert!(!lemma1_check(&sys, &Gain(m1(-1.0)), 3.0).is_valid());
    }

    #[test]
    fn certificate_formulas() {
        let sys = scalar_plant();
        let k = Gain(m1(0.5));
        let c = s2da_certificate(&sys, &k, &sol(m1(1.0), 3.0), 1.0).unwrap();
        assert!((c.kappa - 1.0).abs() < 1e-15 && (c.epsilon - 0.5).abs() < 1e-15);
        let c = s2da_certificate(&sys, &k, &sol(m1(4.0), 3.0), 1.0).unwrap();
        assert!((c.kappa - 2.0).abs() < 1e-15 && (c.epsilon - 0.125).abs() < 1e-15);
    }

    #[test]
    fn certificate_rejects_violated_preconditions() {
        let sys = scalar_plant();
        // P far below the mu floor makes ||K|| exceed kappa
        let err = s2da_certificate(&sys, &Gain(m1(0.5)), &sol(m1(0.01), 3.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::CertificateFailure(_)));
    }

    #[test]
    fn stabilizability_check() {
        let sys = LtiSystem::new(
            m1(1.5),
            m1(1.0),
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            m1(1.0),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        assert!(check_stabilizable(&sys).is_ok());
        let stuck = LtiSystem::new(
            m1(1.5),
            m1(0.0),
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            m1(1.0),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(
            check_stabilizable(&stuck),
            Err(Error::UnstabilizableModel(_))
        ));
    }
}
