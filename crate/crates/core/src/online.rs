//! The online synthesis loop.
//!
//! Each step folds the newly revealed cost pair into running averages,
//! solves the policy equation for the gain currently in use, and produces
//! the next gain by one policy-improvement step. Once the step index
//! reaches the burn-in time `t*`, the improvement is iterated to near
//! convergence (once) before the loop continues.

use log::{debug, info};

use crate::error::{Error, InitFailure, Result};
use crate::numkernel::{eigen_extremes, max_eigenvalue, operator_norm, symmetrize, Matrix};
use crate::riccati::{
    policy_improvement, policy_iteration, s2da_certificate, solve_policy_riccati_with,
    RiccatiOptions, RiccatiSolution, S2daCertificate,
};
use crate::sysmodel::{
    closed_loop, is_valid_controller, is_valid_controller_with, Gain, LtiSystem,
};

/// Folds `(q_t, r_t)` into the running means at step `t >= 1`.
pub fn running_average_update(
    qbar: &Matrix,
    rbar: &Matrix,
    q_t: &Matrix,
    r_t: &Matrix,
    t: usize,
) -> Result<(Matrix, Matrix)> {
    if t == 0 {
        return Err(Error::InvalidConfig(
            "running averages start at t = 1".into(),
        ));
    }
    if qbar.shape() != q_t.shape() || rbar.shape() != r_t.shape() {
        return Err(Error::DimensionMismatch(format!(
            "running average: {:?} vs {:?}, {:?} vs {:?}",
            qbar.shape(),
            q_t.shape(),
            rbar.shape(),
            r_t.shape()
        )));
    }
    if t == 1 {
        return Ok((q_t.clone(), r_t.clone()));
    }
    let keep = (t - 1) as f64 / t as f64;
    let add = 1.0 / t as f64;
    Ok((qbar * keep + q_t * add, rbar * keep + r_t * add))
}

/// Constants of the burn-in and regret analysis.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundConstants {
    pub mu: f64,
    pub nu: f64,
    pub sigma: f64,
    pub b_norm: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub t_star: f64,
    pub p_star: f64,
    pub m: f64,
}

/// `kappa = sqrt(nu/mu)`, `eps = 1/(2 kappa^2)`,
/// `t* = 8 sigma kappa^4 |B| / (eps mu) * (1 + kappa^2 |B| (1 + kappa^2) / eps)`,
/// `p* = 2 sigma / |B| + 4 kappa^2 sigma (1 + kappa^2) / eps`; `m` defaults to 1.
pub fn bound_constants(mu: f64, nu: f64, sigma: f64, b_norm: f64) -> Result<BoundConstants> {
    BoundConstants::new(mu, nu, sigma, b_norm, 1.0)
}

impl BoundConstants {
    pub fn new(mu: f64, nu: f64, sigma: f64, b_norm: f64, m: f64) -> Result<Self> {
        for (v, name) in [
            (mu, "mu"),
            (nu, "nu"),
            (sigma, "sigma"),
            (b_norm, "B_norm"),
            (m, "m"),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveParameter(name));
            }
        }
        let k2 = nu / mu;
        let kappa = k2.sqrt();
        let epsilon = 1.0 / (2.0 * k2);
        let t_star = 8.0 * sigma * k2 * k2 * b_norm / (epsilon * mu)
            * (1.0 + k2 * b_norm * (1.0 + k2) / epsilon);
        let p_star = 2.0 * sigma / b_norm + 4.0 * k2 * sigma * (1.0 + k2) / epsilon;
        Ok(BoundConstants {
            mu,
            nu,
            sigma,
            b_norm,
            kappa,
            epsilon,
            t_star,
            p_star,
            m,
        })
    }

    /// The step index at which the one-off refinement runs, `ceil(t*)`.
    pub fn refinement_step(&self) -> usize {
        self.t_star.ceil().max(1.0) as usize
    }

    /// The burn-in term `2 m p* / (t* + 1)`.
    pub fn burn_in_term(&self) -> f64 {
        2.0 * self.m * self.p_star / (self.t_star + 1.0)
    }
}

/// `Tr(DD') (log T + 2 m p* / (t* + 1) - log t*)` for `T >= t*`.
pub fn regret_bound(constants: &BoundConstants, d: &Matrix, horizon: usize) -> Result<f64> {
    regret_bound_from_trace((d * d.transpose()).trace(), constants, horizon)
}

pub fn regret_bound_from_trace(
    trace_dd: f64,
    constants: &BoundConstants,
    horizon: usize,
) -> Result<f64> {
    if (horizon as f64) < constants.t_star {
        return Err(Error::HorizonBelowBurnIn {
            horizon,
            t_star: constants.t_star,
        });
    }
    Ok(trace_dd * ((horizon as f64).ln() + constants.burn_in_term() - constants.t_star.ln()))
}

/// How the regret constant `m` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MConstant {
    Fixed(f64),
    /// Estimated from the refinement; `default` applies until then.
    Estimated {
        default: f64,
    },
}

impl Default for MConstant {
    fn default() -> Self {
        MConstant::Estimated { default: 1.0 }
    }
}

/// Per-step diagnostics that are relatively expensive to compute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorOptions {
    pub validity: bool,
    pub certificates: bool,
    pub grid_points: usize,
    pub refine_tol: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions {
            validity: false,
            certificates: false,
            grid_points: crate::sysmodel::DEFAULT_GRID_POINTS,
            refine_tol: crate::sysmodel::DEFAULT_REFINE_TOL,
        }
    }
}

impl MonitorOptions {
    pub fn full() -> Self {
        MonitorOptions {
            validity: true,
            certificates: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineConfig {
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
    pub m: MConstant,
    pub riccati: RiccatiOptions,
    /// cap on inner iterations of the burn-in refinement
    pub refine_max_iters: usize,
}

impl OnlineConfig {
    pub fn new(gamma: f64, mu: f64, sigma: f64) -> Self {
        OnlineConfig {
            gamma,
            mu,
            sigma,
            m: MConstant::default(),
            riccati: RiccatiOptions::default(),
            refine_max_iters: 1000,
        }
    }
}

/// Rejects a cost matrix outside `mu I <= M`, `Tr(M) <= sigma`.
pub fn check_admissible(m: &Matrix, mu: f64, sigma: f64, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::CostBoundViolation(format!("{name} is not square")));
    }
    let scale = m.norm().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::CostBoundViolation(format!(
            "{name} is not symmetric"
        )));
    }
    let tol = 1e-10 * scale;
    let (lo, _) = eigen_extremes(m)?;
    if lo < mu - tol {
        return Err(Error::CostBoundViolation(format!(
            "smallest eigenvalue of {name} is {lo:.6} < mu = {mu}"
        )));
    }
    let tr = m.trace();
    if tr > sigma + tol {
        return Err(Error::CostBoundViolation(format!(
            "Tr({name}) = {tr:.6} > sigma = {sigma}"
        )));
    }
    Ok(())
}

/// Outcome of the one-off burn-in refinement.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Refinement {
    pub t: usize,
    /// inner iterations that replaced the live state
    pub iterations: usize,
    /// `||P_d - P_{d-1}||` over the refinement and the diagnostic tail
    pub diffs: Vec<f64>,
    /// observed quadratic-convergence constant `max ||dP_{d+1}|| / ||dP_d||^2`
    pub c_estimate: Option<f64>,
    /// `sum_d ||P_d - P_{d-1}||`, the distance scale behind `m`
    pub tail_sum: f64,
    /// `J_t` before the refinement replaced `P_t`
    pub j_before: f64,
}

/// Certificate invariants as observed at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub kappa: f64,
    pub epsilon: f64,
    pub l_norm: f64,
    pub k_norm: f64,
    pub condition: f64,
    pub reconstruction_error: f64,
    pub passed: bool,
    /// `||H_t^-1 H_{t-1}||` against the previous step's certificate
    pub sequential_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub t: usize,
    /// `||P_t - P_{t-1}||` with `P_0 = 0`
    pub pdiff: f64,
    pub j: f64,
    pub nu: f64,
    pub spectral_radius: Option<f64>,
    pub hinf: Option<f64>,
    pub valid: Option<bool>,
    pub certificate: Option<CertificateCheck>,
}

/// Per-step cost bounds `J_t = Tr(P_t DD')`, counterfactual optima `J*_t`
/// where evaluated, and Riccati differences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTrace {
    pub j: Vec<f64>,
    pub j_star: Vec<Option<f64>>,
    pub pdiff: Vec<f64>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }

    /// `J_t - J*_t` where `J*_t` was evaluated.
    pub fn regret_at(&self, t: usize) -> Option<f64> {
        let idx = t.checked_sub(1)?;
        Some(self.j.get(idx)? - self.j_star.get(idx).copied().flatten()?)
    }

    /// `Tr(DD') (log t + 2 m p*/(t* + 1) - log t*)` for `t >= t*`.
    pub fn bounds(&self, constants: &BoundConstants, trace_dd: f64) -> Vec<Option<f64>> {
        (1..=self.len())
            .map(|t| regret_bound_from_trace(trace_dd, constants, t).ok())
            .collect()
    }
}

/// Regret at a horizon in both algebraic forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regret {
    /// `J_T - J*_T`
    pub direct: f64,
    /// `sum_{t<=T} (J_t - J_{t-1}) - J*_T` with `J_0 = 0`
    pub telescoped: f64,
}

pub fn regret(trace: &RegretTrace, horizon: usize) -> Result<Regret> {
    let available = trace.len();
    let insufficient = || Error::InsufficientTrace {
        requested: horizon,
        available,
    };
    if horizon == 0 || horizon > available {
        return Err(insufficient());
    }
    let j_star = trace.j_star[horizon - 1].ok_or_else(insufficient)?;
    let direct = trace.j[horizon - 1] - j_star;
    let mut prev = 0.0;
    let mut sum = 0.0;
    for &j in &trace.j[..horizon] {
        sum += j - prev;
        prev = j;
    }
    let telescoped = sum - j_star;
    if (telescoped - direct).abs() > 1e-9 * direct.abs().max(1.0) {
        return Err(Error::NumericalFailure(format!(
            "telescoped regret {telescoped} differs from {direct}"
        )));
    }
    Ok(Regret { direct, telescoped })
}

/// Loop state after processing step `t`: the gain `K_t` that was applied,
/// the solution `P_t` of its policy equation under the averaged costs, and
/// the gain `K_{t+1}` for the next step.
#[derive(Debug, Clone)]
pub struct OnlineState {
    sys: LtiSystem,
    config: OnlineConfig,
    monitor: MonitorOptions,
    t: usize,
    qbar: Matrix,
    rbar: Matrix,
    k: Gain,
    p: RiccatiSolution,
    k_next: Gain,
    refined: bool,
    refinement: Option<Refinement>,
    constants: BoundConstants,
    constant_updates: usize,
    certificate: Option<S2daCertificate>,
    history: Vec<HistoryEntry>,
    trace: RegretTrace,
    violations: usize,
}

impl OnlineState {
    /// Processes step 1: `Qbar_1 = Q_1`, `Rbar_1 = R_1`, `P_1` for `K_1`,
    /// and an S2DA certificate for `(K_1, P_1)`.
    pub fn init(
        sys: &LtiSystem,
        q1: &Matrix,
        r1: &Matrix,
        k1: &Gain,
        config: OnlineConfig,
        monitor: MonitorOptions,
    ) -> Result<Self> {
        if !(config.gamma > 0.0) {
            return Err(Error::NonPositiveParameter("gamma"));
        }
        if !(config.mu > 0.0) {
            return Err(Error::NonPositiveParameter("mu"));
        }
        if !(config.sigma > 0.0) {
            return Err(Error::NonPositiveParameter("sigma"));
        }
        check_admissible(q1, config.mu, config.sigma, "Q_1")?;
        check_admissible(r1, config.mu, config.sigma, "R_1")?;
        let validity = is_valid_controller(sys, k1, config.gamma)?;
        if validity.spectral_radius >= 1.0 {
            return Err(Error::InfeasibleInit(InitFailure::SpectralRadius));
        }
        if !validity.valid {
            return Err(Error::InfeasibleInit(InitFailure::HInfinity));
        }
        let p = solve_policy_riccati_with(sys, k1, q1, r1, config.gamma, &config.riccati)
            .map_err(|_| Error::InfeasibleInit(InitFailure::RiccatiFeasibility))?;
        let certificate = s2da_certificate(sys, k1, &p, config.mu)?;
        let nu = max_eigenvalue(&p.p)?;
        let m = match config.m {
            MConstant::Fixed(m) => m,
            MConstant::Estimated { default } => default,
        };
        let constants =
            BoundConstants::new(config.mu, nu, config.sigma, operator_norm(sys.b())?, m)?;
        let mut state = OnlineState {
            sys: sys.clone(),
            config,
            monitor,
            t: 1,
            qbar: q1.clone(),
            rbar: r1.clone(),
            k: k1.clone(),
            k_next: k1.clone(),
            p,
            refined: false,
            refinement: None,
            constants,
            constant_updates: 0,
            certificate: Some(certificate),
            history: Vec::new(),
            trace: RegretTrace::default(),
            violations: 0,
        };
        let pdiff = operator_norm(&state.p.p)?;
        state.finish_step(pdiff, Some(validity))?;
        Ok(state)
    }

    /// Advances to step `t + 1` with the newly revealed costs.
    pub fn step(&mut self, q_t: &Matrix, r_t: &Matrix) -> Result<()> {
        let t = self.t + 1;
        self.advance(t, q_t, r_t).map_err(|e| e.at_step(t))
    }

    fn advance(&mut self, t: usize, q_t: &Matrix, r_t: &Matrix) -> Result<()> {
        check_admissible(q_t, self.config.mu, self.config.sigma, "Q_t")?;
        check_admissible(r_t, self.config.mu, self.config.sigma, "R_t")?;
        let (qbar, rbar) = running_average_update(&self.qbar, &self.rbar, q_t, r_t, t)?;
        let k = self.k_next.clone();
        let p = solve_policy_riccati_with(
            &self.sys,
            &k,
            &qbar,
            &rbar,
            self.config.gamma,
            &self.config.riccati,
        )?;
        let prev_p = std::mem::replace(&mut self.p, p);
        self.t = t;
        self.qbar = qbar;
        self.rbar = rbar;
        self.k = k;
        self.k_next = self.k.clone();
        if !self.refined && t >= self.constants.refinement_step() {
            self.refine()?;
        }
        let pdiff = operator_norm(&(&self.p.p - &prev_p.p))?;
        let validity = if self.monitor.validity {
            Some(is_valid_controller_with(
                &self.sys,
                &self.k,
                self.config.gamma,
                self.monitor.grid_points,
                self.monitor.refine_tol,
            )?)
        } else {
            None
        };
        self.finish_step(pdiff, validity)
    }

    /// Bookkeeping shared by `init` and `step` once `P_t` is final.
    fn finish_step(
        &mut self,
        pdiff: f64,
        validity: Option<crate::sysmodel::Validity>,
    ) -> Result<()> {
        let lam = max_eigenvalue(&self.p.p)?;
        if lam > self.constants.nu {
            self.update_nu(lam)?;
        }
        if !self.refined || self.refinement.as_ref().is_some_and(|r| r.t != self.t) {
            self.k_next = policy_improvement(&self.sys, &self.p, &self.rbar)?;
        }
        let certificate = if self.monitor.certificates || self.t == 1 {
            Some(self.check_certificate()?)
        } else {
            None
        };
        let valid = validity.map(|v| v.valid);
        if valid == Some(false) || certificate.is_some_and(|c| !c.passed) {
            self.violations += 1;
        }
        let j = (&self.p.p * self.sys.d() * self.sys.d().transpose()).trace();
        self.trace.j.push(j);
        self.trace.j_star.push(None);
        self.trace.pdiff.push(pdiff);
        self.history.push(HistoryEntry {
            t: self.t,
            pdiff,
            j,
            nu: self.constants.nu,
            spectral_radius: validity.map(|v| v.spectral_radius),
            hinf: validity.map(|v| v.hinf),
            valid,
            certificate,
        });
        Ok(())
    }

    fn check_certificate(&mut self) -> Result<CertificateCheck> {
        let (f, _) = closed_loop(&self.sys, &self.k)?;
        let cert = match s2da_certificate(&self.sys, &self.k, &self.p, self.config.mu) {
            Ok(c) => c,
            Err(Error::CertificateFailure(msg)) => {
                debug!("step {}: certificate failed: {msg}", self.t);
                return Ok(CertificateCheck {
                    kappa: f64::NAN,
                    epsilon: f64::NAN,
                    l_norm: f64::NAN,
                    k_norm: f64::NAN,
                    condition: f64::NAN,
                    reconstruction_error: f64::NAN,
                    passed: false,
                    sequential_gap: None,
                });
            }
            Err(e) => return Err(e),
        };
        let report = cert.check(&f, &self.k)?;
        let sequential_gap = match &self.certificate {
            Some(prev) if self.t > 1 => Some(prev.sequential_gap(&cert)?),
            _ => None,
        };
        self.certificate = Some(cert);
        Ok(CertificateCheck {
            kappa: report.kappa,
            epsilon: report.epsilon,
            l_norm: report.l_norm,
            k_norm: report.k_norm,
            condition: report.condition,
            reconstruction_error: report.reconstruction_error,
            passed: report.failure().is_none(),
            sequential_gap,
        })
    }

    fn update_nu(&mut self, nu: f64) -> Result<()> {
        let c = &self.constants;
        let mut next = BoundConstants::new(c.mu, nu, c.sigma, c.b_norm, c.m)?;
        self.rescale_m(&mut next);
        self.constant_updates += 1;
        if self.constant_updates <= 5 || self.constant_updates.is_power_of_two() {
            info!(
                "step {}: nu {:.6} -> {:.6}, t* {:.1} -> {:.1} (update #{})",
                self.t, c.nu, nu, c.t_star, next.t_star, self.constant_updates
            );
        }
        self.constants = next;
        Ok(())
    }

    /// Keeps `m p* / (t* + 1)` equal to the observed tail sum once `m` has
    /// been estimated.
    fn rescale_m(&self, constants: &mut BoundConstants) {
        if let (MConstant::Estimated { .. }, Some(r)) = (self.config.m, &self.refinement) {
            constants.m =
                (r.tail_sum * (constants.t_star + 1.0) / constants.p_star).max(f64::MIN_POSITIVE);
        }
    }

    /// Alternates policy solves and improvements at the current averaged
    /// costs until `||P_d - P_{d-1}|| <= p*/t*`; the result replaces
    /// `(P_t, K_{t+1})`. The iteration is then continued off-line to
    /// estimate the tail sum behind `m`.
    fn refine(&mut self) -> Result<()> {
        let threshold = self.constants.p_star / self.constants.t_star;
        let j_before = (&self.p.p * self.sys.d() * self.sys.d().transpose()).trace();
        let mut prev = self.p.clone();
        let mut k_d = self.k.clone();
        let mut diffs = Vec::new();
        let mut iterations = 0;
        for _ in 0..self.config.refine_max_iters {
            k_d = policy_improvement(&self.sys, &prev, &self.rbar)?;
            let p_d = solve_policy_riccati_with(
                &self.sys,
                &k_d,
                &self.qbar,
                &self.rbar,
                self.config.gamma,
                &self.config.riccati,
            )?;
            let diff = operator_norm(&(&p_d.p - &prev.p))?;
            diffs.push(diff);
            iterations += 1;
            prev = p_d;
            if diff <= threshold {
                break;
            }
        }
        let live_p = prev.clone();
        // diagnostic continuation toward the fixed point
        let mut tail = prev;
        for _ in 0..200 {
            let last = *diffs.last().unwrap_or(&0.0);
            if last <= 1e-13 * tail.p.norm().max(1.0) {
                break;
            }
            let k = policy_improvement(&self.sys, &tail, &self.rbar)?;
            let next = solve_policy_riccati_with(
                &self.sys,
                &k,
                &self.qbar,
                &self.rbar,
                self.config.gamma,
                &self.config.riccati,
            )?;
            diffs.push(operator_norm(&(&next.p - &tail.p))?);
            tail = next;
        }
        let c_estimate = diffs
            .windows(2)
            .filter(|w| w[0] > 1e-10)
            .map(|w| w[1] / (w[0] * w[0]))
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            });
        let tail_sum: f64 = diffs.iter().sum();
        info!(
            "step {}: refinement ran {iterations} iteration(s), tail sum {tail_sum:.3e}, threshold {threshold:.3e}",
            self.t
        );
        self.p = live_p;
        self.k_next = k_d;
        self.refined = true;
        self.refinement = Some(Refinement {
            t: self.t,
            iterations,
            diffs,
            c_estimate,
            tail_sum,
            j_before,
        });
        let mut constants = self.constants;
        self.rescale_m(&mut constants);
        self.constants = constants;
        Ok(())
    }

    /// Solves the stationary problem at the current averaged costs and
    /// records `J*_t` in the trace.
    pub fn record_counterfactual(&mut self) -> Result<f64> {
        let (_, sol) = self.counterfactual_optimum()?;
        let j_star = (&sol.p * self.sys.d() * self.sys.d().transpose()).trace();
        if let Some(slot) = self.trace.j_star.last_mut() {
            *slot = Some(j_star);
        }
        Ok(j_star)
    }

    /// Best fixed gain for the current averaged costs, warm-started from
    /// `K_t` (whose feasible policy solve certifies it as a valid start).
    pub fn counterfactual_optimum(&self) -> Result<(Gain, RiccatiSolution)> {
        policy_iteration(
            &self.sys,
            &self.qbar,
            &self.rbar,
            self.config.gamma,
            &self.k,
        )
    }

    pub fn t(&self) -> usize {
        self.t
    }
    pub fn system(&self) -> &LtiSystem {
        &self.sys
    }
    pub fn config(&self) -> &OnlineConfig {
        &self.config
    }
    pub fn qbar(&self) -> &Matrix {
        &self.qbar
    }
    pub fn rbar(&self) -> &Matrix {
        &self.rbar
    }
    /// `K_t`, the gain applied at the current step.
    pub fn gain(&self) -> &Gain {
        &self.k
    }
    /// `K_{t+1}`
    pub fn next_gain(&self) -> &Gain {
        &self.k_next
    }
    pub fn riccati(&self) -> &RiccatiSolution {
        &self.p
    }
    pub fn refined(&self) -> bool {
        self.refined
    }
    pub fn refinement(&self) -> Option<&Refinement> {
        self.refinement.as_ref()
    }
    pub fn constants(&self) -> &BoundConstants {
        &self.constants
    }
    pub fn constant_updates(&self) -> usize {
        self.constant_updates
    }
    pub fn certificate(&self) -> Option<&S2daCertificate> {
        self.certificate.as_ref()
    }
    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }
    pub fn trace(&self) -> &RegretTrace {
        &self.trace
    }
    pub fn violations(&self) -> usize {
        self.violations
    }
}

/// Averages a cost sequence in one pass (used to cross-check the running
/// update).
pub fn batch_mean(items: &[Matrix]) -> Option<Matrix> {
    let first = items.first()?;
    let sum = items.iter().skip(1).fold(first.clone(), |acc, m| acc + m);
    Some(symmetrize(&(sum / items.len() as f64)))
}
