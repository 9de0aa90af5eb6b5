use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which membership test an initial gain failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitFailure {
    SpectralRadius,
    HInfinity,
    RiccatiFeasibility,
}

impl fmt::Display for InitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitFailure::SpectralRadius => write!(f, "spectral radius of A-BK is not below 1"),
            InitFailure::HInfinity => {
                write!(f, "H-infinity norm of the closed loop is not below gamma")
            }
            InitFailure::RiccatiFeasibility => {
                write!(f, "modified Riccati equation has no feasible solution")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    AsymmetricInput { asymmetry: f64 },
    #[error("Lyapunov operator is not stable (spectral radius {0:.6})")]
    UnstableF(f64),
    #[error("matrix exponential overflowed")]
    Overflow,
    #[error("sampling interval must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("closed loop is not stable (spectral radius {0:.6})")]
    UnstableClosedLoop(f64),
    #[error("state norm {norm:.3e} exceeded overflow threshold at step {step}")]
    StateOverflow { step: usize, norm: f64 },
    #[error("gamma-feasibility lost: smallest eigenvalue of gamma^2 I - D'PD is {margin:.3e}")]
    GammaInfeasible { margin: f64 },
    #[error("gain is not stabilizing (spectral radius {0:.6})")]
    UnstableGain(f64),
    #[error("no convergence after {iterations} iterations (last change {change:.3e})")]
    NonConvergence { iterations: usize, change: f64 },
    #[error("R + B'P~B is not positive definite")]
    SingularInnerMatrix,
    #[error("initial gain is not admissible: {0}")]
    InfeasibleInit(InitFailure),
    #[error("S2DA certificate check failed: {0}")]
    CertificateFailure(String),
    #[error("cost matrices violate the admissibility envelope: {0}")]
    CostBoundViolation(String),
    #[error("trace has {available} entries, {requested} requested")]
    InsufficientTrace { requested: usize, available: usize },
    #[error("horizon {horizon} is below the burn-in time t* = {t_star:.3}")]
    HorizonBelowBurnIn { horizon: usize, t_star: f64 },
    #[error("parameter `{0}` must be positive")]
    NonPositiveParameter(&'static str),
    #[error("denial-of-service cancellation requires D = I")]
    DosRequiresIdentityD,
    #[error("base cost matrix is not admissible: {0}")]
    InadmissibleBase(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("model violates structural assumptions: {0}")]
    AssumptionViolation(String),
    #[error("model is not stabilizable: {0}")]
    UnstabilizableModel(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// Errors caused by bad inputs (files, configs, models) rather than by
    /// the synthesis running into infeasibility.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::AtStep { source, .. } => source.is_validation(),
            Error::Parse(_)
            | Error::Schema(_)
            | Error::AssumptionViolation(_)
            | Error::UnstabilizableModel(_)
            | Error::InvalidConfig(_)
            | Error::InadmissibleBase(_)
            | Error::DosRequiresIdentityD
            | Error::NonPositiveParameter(_)
            | Error::NonPositiveDt(_)
            | Error::Io(_) => true,
            _ => false,
        }
    }
}
