//! Disturbance generators and admissible cost sequences for the attack
//! scenarios.
//!
//! Every draw is a pure function of `(seed, t)`: the generator for step `t`
//! is a ChaCha stream selected by `t` under a key derived from the seed, so
//! replicas and re-runs reproduce bit for bit regardless of call order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numkernel::{eigen_extremes, operator_norm, symmetric_eigen, symmetrize, Matrix};
use crate::sysmodel::{LtiSystem, Vector};

const DISTURBANCE_KEY: u64 = 0x5d1f_0a7e_3c29_b841;
const COST_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

fn stream(seed: u64, key: u64, t: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ key);
    rng.set_stream(t as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Arbitrary,
    DenialOfService,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub w_max: f64,
    /// inclusive window `[t_a, t'_a]`, used only by `DenialOfService`
    pub dos_window: Option<(usize, usize)>,
    pub seed: u64,
}

impl AttackConfig {
    pub fn arbitrary(w_max: f64, seed: u64) -> Self {
        AttackConfig {
            kind: AttackKind::Arbitrary,
            w_max,
            dos_window: None,
            seed,
        }
    }

    pub fn dos(w_max: f64, window: (usize, usize), seed: u64) -> Self {
        AttackConfig {
            kind: AttackKind::DenialOfService,
            w_max,
            dos_window: Some(window),
            seed,
        }
    }

    /// Window `[T/4, T/2]` for horizon `T`.
    pub fn default_dos_window(horizon: usize) -> (usize, usize) {
        let start = (horizon / 4).max(2);
        (start, (horizon / 2).max(start))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_max >= 0.0) || !self.w_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "w_max must be finite and >= 0, got {}",
                self.w_max
            )));
        }
        if self.kind == AttackKind::DenialOfService {
            match self.dos_window {
                Some((a, b)) if a > 1 && a <= b => {}
                Some((a, b)) => {
                    return Err(Error::InvalidConfig(format!(
                        "DoS window [{a}, {b}] needs 1 < t_a <= t'_a"
                    )));
                }
                None => return Err(Error::InvalidConfig("DoS attack needs a window".into())),
            }
        }
        Ok(())
    }

    pub fn in_window(&self, t: usize) -> bool {
        self.kind == AttackKind::DenialOfService
            && self.dos_window.is_some_and(|(a, b)| a <= t && t <= b)
    }
}

/// A vector of length `p` with uniform direction and radius uniform on
/// `[0, w_max]`.
pub fn bounded_disturbance(cfg: &AttackConfig, t: usize, p: usize) -> Vector {
    if p == 0 || cfg.w_max == 0.0 {
        return Vector::zeros(p);
    }
    let mut rng = stream(cfg.seed, DISTURBANCE_KEY, t);
    loop {
        let dir = Vector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm > 1e-300 {
            let radius = cfg.w_max * rng.random::<f64>();
            return dir * (radius / norm);
        }
    }
}

/// `-B u_t` inside the attack window, a bounded draw elsewhere.
pub fn dos_disturbance(
    cfg: &AttackConfig,
    t: usize,
    sys: &LtiSystem,
    u_t: &Vector,
) -> Result<Vector> {
    if !sys.d_is_identity(1e-12) {
        return Err(Error::DosRequiresIdentityD);
    }
    if cfg.in_window(t) {
        Ok(-(sys.b() * u_t))
    } else {
        Ok(bounded_disturbance(cfg, t, sys.disturbances()))
    }
}

/// Supplies `w_t` given the step index and the control just applied.
pub trait DisturbanceSource: Send + Sync {
    fn disturbance(&self, t: usize, u_t: &Vector) -> Result<Vector>;
}

/// The configured attack bound to a plant.
#[derive(Debug, Clone)]
pub struct Adversary {
    cfg: AttackConfig,
    b: Matrix,
    p: usize,
}

impl Adversary {
    pub fn new(cfg: AttackConfig, sys: &LtiSystem) -> Result<Self> {
        cfg.validate()?;
        if cfg.kind == AttackKind::DenialOfService && !sys.d_is_identity(1e-12) {
            return Err(Error::DosRequiresIdentityD);
        }
        Ok(Adversary {
            cfg,
            b: sys.b().clone(),
            p: sys.disturbances(),
        })
    }

    pub fn config(&self) -> &AttackConfig {
        &self.cfg
    }
}

impl DisturbanceSource for Adversary {
    fn disturbance(&self, t: usize, u_t: &Vector) -> Result<Vector> {
        if self.cfg.in_window(t) {
            Ok(-(&self.b * u_t))
        } else {
            Ok(bounded_disturbance(&self.cfg, t, self.p))
        }
    }
}

/// Replays a fixed sequence (`w_1, w_2, ...`), zero past its end.
#[derive(Debug, Clone)]
pub struct ScriptedDisturbance {
    pub sequence: Vec<Vector>,
    pub p: usize,
}

impl DisturbanceSource for ScriptedDisturbance {
    fn disturbance(&self, t: usize, _u_t: &Vector) -> Result<Vector> {
        Ok(t.checked_sub(1)
            .and_then(|i| self.sequence.get(i))
            .cloned()
            .unwrap_or_else(|| Vector::zeros(self.p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CostPerturbConfig {
    pub delta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl CostPerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "delta must be finite and >= 0, got {}",
                self.delta
            )));
        }
        if !(self.mu > 0.0) {
            return Err(Error::NonPositiveParameter("mu"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::NonPositiveParameter("sigma"));
        }
        Ok(())
    }
}

fn check_base(m: &Matrix, mu: f64, sigma: f64, name: &str) -> Result<()> {
    if !m.is_square() || (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InadmissibleBase(format!(
            "{name} is not square and symmetric"
        )));
    }
    let n = m.nrows() as f64;
    let tol = 1e-10 * m.norm().max(1.0);
    let (lo, _) = eigen_extremes(m)?;
    if lo < mu - tol {
        return Err(Error::InadmissibleBase(format!(
            "smallest eigenvalue of {name} is {lo:.6} < mu = {mu}"
        )));
    }
    if m.trace() > sigma + tol {
        return Err(Error::InadmissibleBase(format!(
            "Tr({name}) = {:.6} > sigma = {sigma}",
            m.trace()
        )));
    }
    if n * mu > sigma {
        return Err(Error::InadmissibleBase(format!(
            "{n} * mu = {} exceeds sigma = {sigma}",
            n * mu
        )));
    }
    Ok(())
}

fn random_symmetric(rng: &mut ChaCha20Rng, n: usize, size: f64) -> Result<Matrix> {
    let g = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = symmetrize(&g);
    let norm = operator_norm(&s)?;
    let scale = rng.random::<f64>() * size;
    if norm == 0.0 {
        return Ok(Matrix::zeros(n, n));
    }
    Ok(s * (scale / norm))
}

/// Floors eigenvalues at `mu`, then shrinks the part above `mu` so that the
/// trace does not exceed `sigma`.
pub fn clip_spectrum(m: &Matrix, mu: f64, sigma: f64) -> Result<Matrix> {
    let n = m.nrows();
    let eig = symmetric_eigen(m)?;
    let (mut vals, vecs) = (eig.eigenvalues, eig.eigenvectors);
    // keep rounding in the reconstruction from leaving the envelope
    let guard = 8.0 * f64::EPSILON * sigma.max(1.0) * n as f64;
    let floor = mu + guard;
    let cap = sigma - guard * n as f64;
    for v in vals.iter_mut() {
        *v = v.max(floor);
    }
    let total: f64 = vals.iter().sum();
    if total > cap {
        let excess = total - n as f64 * floor;
        let room = (cap - n as f64 * floor).max(0.0);
        let s = if excess > 0.0 { room / excess } else { 0.0 };
        for v in vals.iter_mut() {
            *v = floor + (*v - floor) * s;
        }
    }
    let rebuilt = &vecs * Matrix::from_diagonal(&vals) * vecs.transpose();
    Ok(symmetrize(&rebuilt))
}

/// `(Q_t, R_t)`: the bases plus random symmetric perturbations of norm at
/// most `delta |base|`, clipped into `mu I <= M`, `Tr(M) <= sigma`.
pub fn perturbed_costs(
    cfg: &CostPerturbConfig,
    q_base: &Matrix,
    r_base: &Matrix,
    t: usize,
) -> Result<(Matrix, Matrix)> {
    cfg.validate()?;
    check_base(q_base, cfg.mu, cfg.sigma, "Q")?;
    check_base(r_base, cfg.mu, cfg.sigma, "R")?;
    if cfg.delta == 0.0 {
        return Ok((q_base.clone(), r_base.clone()));
    }
    let mut rng = stream(cfg.seed, COST_KEY, t);
    let dq = random_symmetric(&mut rng, q_base.nrows(), cfg.delta * operator_norm(q_base)?)?;
    let dr = random_symmetric(&mut rng, r_base.nrows(), cfg.delta * operator_norm(r_base)?)?;
    Ok((
        clip_spectrum(&(q_base + dq), cfg.mu, cfg.sigma)?,
        clip_spectrum(&(r_base + dr), cfg.mu, cfg.sigma)?,
    ))
}
