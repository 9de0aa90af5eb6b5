//! Experiment harness: model files, seeded runs of the online loop under an
//! attack, and the CSV/JSON artifacts they leave behind.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::adversary::{
    perturbed_costs, Adversary, AttackConfig, AttackKind, CostPerturbConfig, DisturbanceSource,
};
use crate::error::{Error, Result};
use crate::numkernel::{operator_norm, spectral_radius, Matrix};
use crate::online::{
    check_admissible, regret, regret_bound_from_trace, BoundConstants, MConstant, MonitorOptions,
    OnlineConfig, OnlineState,
};
use crate::riccati::{check_stabilizable, initial_gain, solve_stationary};
use crate::sysmodel::{
    closed_loop, is_valid_controller_with, zoh_discretize, Gain, LtiSystem, Trajectory, Vector,
    DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL,
};

/// Column names of `trace.csv`.
pub const TRACE_HEADER: [&str; 10] = [
    "t",
    "J",
    "J_star",
    "regret",
    "regret_norm",
    "bound",
    "pdiff",
    "specrad",
    "hinf",
    "nu",
];

fn is_false(v: &bool) -> bool {
    !*v
}

/// On-disk plant description. Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub continuous: bool,
    pub dt: f64,
    /// For continuous models: `D` acts at the sampling instants and is
    /// taken as-is instead of being discretized with `A` and `B`.
    #[serde(default, skip_serializing_if = "is_false")]
    pub disturbance_sampled: bool,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(rename = "E")]
    pub e: Vec<Vec<f64>>,
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
    pub w_max: f64,
}

/// A loaded, validated model.
#[derive(Debug, Clone)]
pub struct Model {
    pub file: ModelFile,
    pub sys: LtiSystem,
    /// gain found by the stabilizability check
    pub stabilizing_gain: Gain,
}

pub fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::Schema(format!("{name} is empty")));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != c) {
        return Err(Error::Schema(format!(
            "{name} row {i} has {} entries, expected {c}",
            rows[i].len()
        )));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|row| row.iter().copied().collect())
        .collect()
}

fn json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => Error::Schema(e.to_string()),
        _ => Error::Parse(e.to_string()),
    }
}

pub fn parse_model(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text).map_err(json_error)?;
    build_model(file)
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path)?;
    parse_model(&text)
}

pub fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(file).map_err(|e| Error::Schema(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Checks scalars and shapes, discretizes continuous models, and runs the
/// plant and stabilizability checks.
pub fn build_model(file: ModelFile) -> Result<Model> {
    for (v, name) in [
        (file.gamma, "gamma"),
        (file.mu, "mu"),
        (file.sigma, "sigma"),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Schema(format!("{name} must be positive, got {v}")));
        }
    }
    if !(file.w_max >= 0.0) || !file.w_max.is_finite() {
        return Err(Error::Schema(format!(
            "w_max must be non-negative, got {}",
            file.w_max
        )));
    }
    if file.continuous && !(file.dt > 0.0 && file.dt.is_finite()) {
        return Err(Error::Schema(format!(
            "dt must be positive for a continuous model, got {}",
            file.dt
        )));
    }
    let a = matrix_from_rows(&file.a, "A")?;
    let b = matrix_from_rows(&file.b, "B")?;
    let c = matrix_from_rows(&file.c, "C")?;
    let d = matrix_from_rows(&file.d, "D")?;
    let e = matrix_from_rows(&file.e, "E")?;
    let schema = |err: Error| match err {
        Error::DimensionMismatch(msg) | Error::NumericalFailure(msg) => Error::Schema(msg),
        Error::NonSquare { rows, cols } => Error::Schema(format!("A is {rows}x{cols}")),
        other => other,
    };
    let (a, b, d) = if file.continuous {
        let (ad, bd, dd) = zoh_discretize(&a, &b, &d, file.dt).map_err(schema)?;
        (ad, bd, if file.disturbance_sampled { d } else { dd })
    } else {
        (a, b, d)
    };
    let sys = LtiSystem::new(a, b, c, d, e).map_err(schema)?;
    check_admissible(sys.q(), file.mu, file.sigma, "Q = C'C")
        .and_then(|_| check_admissible(sys.r(), file.mu, file.sigma, "R = E'E"))
        .map_err(|e| Error::AssumptionViolation(format!("cost envelope: {e}")))?;
    let stabilizing_gain = check_stabilizable(&sys)?;
    Ok(Model {
        file,
        sys,
        stabilizing_gain,
    })
}

/// Directory holding the bundled benchmark models.
pub fn bundled_models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models")
}

pub fn bundled_model_path(name: &str) -> PathBuf {
    bundled_models_dir().join(format!("{name}.json"))
}

/// Where the first gain comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum K1Source {
    /// optimal stationary gain for `(Q_1, R_1)` at the given level
    Stationary { gamma_init: f64 },
    /// a JSON nested array holding `K_1`
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model_path: PathBuf,
    pub horizon: usize,
    pub attack: AttackConfig,
    pub cost_perturb: CostPerturbConfig,
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
    pub m: MConstant,
    pub k1_source: K1Source,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub trace_stride: usize,
    pub monitor: Monitor,
}

/// How much closed-loop checking a run does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    /// validity and certificate at every step
    Full,
    /// validity at emitted rows only
    Rows,
    /// spectral radius at emitted rows only
    Off,
}

impl ExperimentConfig {
    /// Defaults taken from the model file: its `gamma`, `mu`, `sigma`,
    /// `w_max`; perturbation scale 0.1; DoS window `[T/4, T/2]`.
    pub fn for_model(
        model_path: &Path,
        model: &ModelFile,
        horizon: usize,
        kind: AttackKind,
        seed: u64,
        out_dir: &Path,
    ) -> Self {
        let attack = match kind {
            AttackKind::Arbitrary => AttackConfig::arbitrary(model.w_max, seed),
            AttackKind::DenialOfService => {
                AttackConfig::dos(model.w_max, AttackConfig::default_dos_window(horizon), seed)
            }
        };
        ExperimentConfig {
            model_path: model_path.to_path_buf(),
            horizon,
            attack,
            cost_perturb: CostPerturbConfig {
                delta: 0.1,
                mu: model.mu,
                sigma: model.sigma,
                seed,
            },
            gamma: model.gamma,
            mu: model.mu,
            sigma: model.sigma,
            m: MConstant::default(),
            k1_source: K1Source::Stationary {
                gamma_init: model.gamma,
            },
            out_dir: out_dir.to_path_buf(),
            seed,
            trace_stride: default_stride(horizon),
            monitor: Monitor::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::InvalidConfig(format!(
                "horizon must be at least 2, got {}",
                self.horizon
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::NonPositiveParameter("gamma"));
        }
        if !(self.mu > 0.0) {
            return Err(Error::NonPositiveParameter("mu"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::NonPositiveParameter("sigma"));
        }
        if self.trace_stride == 0 {
            return Err(Error::InvalidConfig(
                "trace stride must be at least 1".into(),
            ));
        }
        let (MConstant::Fixed(m) | MConstant::Estimated { default: m }) = self.m;
        if !(m > 0.0) {
            return Err(Error::NonPositiveParameter("m"));
        }
        self.attack.validate()?;
        self.cost_perturb.validate()?;
        if let K1Source::Stationary { gamma_init } = self.k1_source {
            if !(gamma_init > 0.0) {
                return Err(Error::NonPositiveParameter("gamma_init"));
            }
        }
        Ok(())
    }
}

/// 1 up to `T = 1000`, 10 beyond.
pub fn default_stride(horizon: usize) -> usize {
    if horizon <= 1000 {
        1
    } else {
        10
    }
}

/// One emitted line of `trace.csv`; `None` becomes an empty field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "J_star")]
    pub j_star: Option<f64>,
    pub regret: Option<f64>,
    pub regret_norm: Option<f64>,
    pub bound: Option<f64>,
    pub pdiff: f64,
    pub specrad: Option<f64>,
    pub hinf: Option<f64>,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub t: usize,
    pub iterations: usize,
    pub c_estimate: Option<f64>,
    pub tail_sum: f64,
    pub j_before: f64,
    pub regret_before: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: String,
    pub error: Option<String>,
    pub model: String,
    pub horizon: usize,
    pub steps_completed: usize,
    pub seed: u64,
    pub attack: AttackKind,
    pub gamma: f64,
    pub mu: f64,
    pub sigma: f64,
    pub trace_dd: f64,
    pub b_norm: f64,
    pub regret: Option<f64>,
    pub regret_telescoped: Option<f64>,
    pub bound: Option<f64>,
    pub t_star: f64,
    pub p_star: f64,
    pub nu_final: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub m: f64,
    pub m_source: String,
    pub refinement: Option<RefinementSummary>,
    /// divisor of the `regret_norm` column
    pub normalizer: f64,
    pub violations: usize,
    pub monitored_steps: usize,
    pub certificate_failures: usize,
    pub max_specrad: Option<f64>,
    pub max_hinf: Option<f64>,
    pub max_sequential_gap: Option<f64>,
    pub dos_max_defect: Option<f64>,
    pub j_final: Option<f64>,
    pub j_star_final: Option<f64>,
}

impl Summary {
    pub fn constants(&self) -> Result<BoundConstants> {
        BoundConstants::new(self.mu, self.nu_final, self.sigma, self.b_norm, self.m)
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<TraceRow>,
    pub summary: Summary,
    pub trajectory: Trajectory,
    pub state: OnlineState,
}

pub fn load_gain(path: &Path) -> Result<Gain> {
    let text = fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(json_error)?;
    Ok(Gain(matrix_from_rows(&rows, "K_1")?))
}

fn resolve_k1(cfg: &ExperimentConfig, model: &Model, q1: &Matrix, r1: &Matrix) -> Result<Gain> {
    match &cfg.k1_source {
        K1Source::File(path) => load_gain(path),
        K1Source::Stationary { gamma_init } => {
            let k0 = initial_gain(&model.sys, q1, r1, *gamma_init).unwrap_or_else(|e| {
                warn!("value iteration at gamma {gamma_init} failed ({e}); starting from the stabilizing gain");
                model.stabilizing_gain.clone()
            });
            Ok(solve_stationary(&model.sys, q1, r1, *gamma_init, &k0)?.0)
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let model = load_model(&cfg.model_path)?;
    let adversary = Adversary::new(cfg.attack, &model.sys)?;
    run_experiment_with(cfg, &model, &adversary)
}

/// Runs the loop against an arbitrary disturbance source and writes
/// `config.echo.json`, `trace.csv` and `summary.json` to `cfg.out_dir`.
/// On failure the rows produced so far are still written.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    model: &Model,
    source: &dyn DisturbanceSource,
) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let echo = serde_json::to_string_pretty(cfg).map_err(|e| Error::Schema(e.to_string()))?;
    fs::write(cfg.out_dir.join("config.echo.json"), echo + "\n")?;

    let mut run = Run::new(cfg, model)?;
    let result = run.execute(source);
    let rows = run.finish_rows();
    write_trace(&cfg.out_dir.join("trace.csv"), &rows)?;
    let summary = run.summary(result.as_ref().err())?;
    write_summary(&cfg.out_dir.join("summary.json"), &summary)?;
    result?;
    let state = run.state.expect("state exists after a successful run");
    Ok(RunOutcome {
        rows,
        summary,
        trajectory: run.trajectory,
        state,
    })
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a Model,
    state: Option<OnlineState>,
    trajectory: Trajectory,
    rows: Vec<TraceRow>,
    steps: usize,
    dos_defect: Option<f64>,
    extra_violations: usize,
    spot_radii: Vec<f64>,
    spot_hinf: Vec<f64>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a ExperimentConfig, model: &'a Model) -> Result<Self> {
        Ok(Run {
            cfg,
            model,
            state: None,
            trajectory: Trajectory::new(Vector::zeros(model.sys.states())),
            rows: Vec::new(),
            steps: 0,
            dos_defect: None,
            extra_violations: 0,
            spot_radii: Vec::new(),
            spot_hinf: Vec::new(),
        })
    }

    fn costs(&self, t: usize) -> Result<(Matrix, Matrix)> {
        perturbed_costs(
            &self.cfg.cost_perturb,
            self.model.sys.q(),
            self.model.sys.r(),
            t,
        )
        .map_err(|e| e.at_step(t))
    }

    fn execute(&mut self, source: &dyn DisturbanceSource) -> Result<()> {
        let cfg = self.cfg;
        let sys = &self.model.sys;
        let (q1, r1) = self.costs(1)?;
        let k1 = resolve_k1(cfg, self.model, &q1, &r1)?;
        let online = OnlineConfig {
            m: cfg.m,
            ..OnlineConfig::new(cfg.gamma, cfg.mu, cfg.sigma)
        };
        let monitor = if cfg.monitor == Monitor::Full {
            MonitorOptions::full()
        } else {
            MonitorOptions::default()
        };
        self.state = Some(OnlineState::init(sys, &q1, &r1, &k1, online, monitor)?);
        for t in 1..=cfg.horizon {
            if t > 1 {
                let (q, r) = self.costs(t)?;
                self.state.as_mut().expect("initialized").step(&q, &r)?;
            }
            let state = self.state.as_mut().expect("initialized");
            let k = state.gain().clone();
            let x = self.trajectory.current_state().clone();
            let u = -(k.matrix() * &x);
            let w = source.disturbance(t, &u).map_err(|e| e.at_step(t))?;
            self.trajectory.advance(sys, &k, |_, _| w)?;
            if cfg.attack.in_window(t) {
                let x_next = self.trajectory.current_state();
                let defect = (x_next - sys.a() * &x).norm();
                self.dos_defect = Some(self.dos_defect.map_or(defect, |d: f64| d.max(defect)));
            }
            let emit = (t - 1) % cfg.trace_stride == 0;
            let refined_now = state.refinement().is_some_and(|r| r.t == t);
            let j_star = if emit || t == cfg.horizon || refined_now {
                Some(state.record_counterfactual().map_err(|e| e.at_step(t))?)
            } else {
                None
            };
            if emit {
                let entry = state
                    .history()
                    .last()
                    .expect("history has the current step")
                    .clone();
                let (specrad, hinf) = match (entry.spectral_radius, entry.hinf, cfg.monitor) {
                    (Some(s), Some(h), _) => (s, Some(h)),
                    (_, _, Monitor::Off) => {
                        let rho = spectral_radius(&closed_loop(sys, &k)?.0)?;
                        if rho >= 1.0 {
                            self.extra_violations += 1;
                        }
                        self.spot_radii.push(rho);
                        (rho, None)
                    }
                    _ => {
                        let v = is_valid_controller_with(
                            sys,
                            &k,
                            cfg.gamma,
                            DEFAULT_GRID_POINTS,
                            DEFAULT_REFINE_TOL,
                        )?;
                        if !v.valid {
                            self.extra_violations += 1;
                        }
                        self.spot_radii.push(v.spectral_radius);
                        self.spot_hinf.push(v.hinf);
                        (v.spectral_radius, Some(v.hinf))
                    }
                };
                self.rows.push(TraceRow {
                    t,
                    j: entry.j,
                    j_star,
                    regret: j_star.map(|js| entry.j - js),
                    regret_norm: None,
                    bound: None,
                    pdiff: entry.pdiff,
                    specrad: Some(specrad),
                    hinf,
                    nu: entry.nu,
                });
            }
            self.steps = t;
            if t % 10_000 == 0 {
                info!("step {t}/{}", cfg.horizon);
            }
        }
        Ok(())
    }

    /// Regret of the pre-refinement iterate at the refinement step.
    fn regret_before(&self) -> Option<f64> {
        let state = self.state.as_ref()?;
        let r = state.refinement()?;
        let j_star = state.trace().j_star.get(r.t - 1).copied().flatten()?;
        Some(r.j_before - j_star)
    }

    fn normalizer(&self) -> f64 {
        let fallback = || {
            self.rows
                .iter()
                .filter_map(|r| r.regret)
                .map(f64::abs)
                .reduce(f64::max)
        };
        match self.regret_before().or_else(fallback) {
            Some(v) if v.is_finite() && v.abs() > 1e-300 => v.abs(),
            _ => 1.0,
        }
    }

    fn finish_rows(&mut self) -> Vec<TraceRow> {
        let Some(state) = self.state.as_ref() else {
            return Vec::new();
        };
        let constants = *state.constants();
        let trace_dd = self.model.sys.disturbance_trace();
        let norm = self.normalizer();
        let mut rows = std::mem::take(&mut self.rows);
        for row in &mut rows {
            row.regret_norm = row.regret.map(|r| r / norm);
            row.bound = regret_bound_from_trace(trace_dd, &constants, row.t).ok();
        }
        rows
    }

    fn summary(&self, error: Option<&Error>) -> Result<Summary> {
        let cfg = self.cfg;
        let sys = &self.model.sys;
        let trace_dd = sys.disturbance_trace();
        let b_norm = operator_norm(sys.b())?;
        let fallback = BoundConstants::new(
            cfg.mu,
            cfg.mu,
            cfg.sigma,
            b_norm.max(f64::MIN_POSITIVE),
            1.0,
        )?;
        let state = self.state.as_ref();
        let constants = state.map_or(fallback, |s| *s.constants());
        let final_regret = match (state, error) {
            (Some(s), None) => Some(regret(s.trace(), cfg.horizon)?),
            _ => None,
        };
        let history = state.map_or(&[][..], |s| s.history());
        let monitored: Vec<_> = history.iter().filter(|h| h.valid.is_some()).collect();
        let specrads = monitored
            .iter()
            .filter_map(|h| h.spectral_radius)
            .chain(self.spot_radii.iter().copied());
        let hinfs = monitored
            .iter()
            .filter_map(|h| h.hinf)
            .chain(self.spot_hinf.iter().copied());
        let max_of = |it: &mut dyn Iterator<Item = f64>| {
            it.fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
        };
        let certs: Vec<_> = history.iter().filter_map(|h| h.certificate).collect();
        let m_source = match (cfg.m, state.and_then(|s| s.refinement())) {
            (MConstant::Fixed(_), _) => "fixed",
            (MConstant::Estimated { .. }, Some(_)) => "estimated",
            (MConstant::Estimated { .. }, None) => "default",
        };
        let j_final = state.and_then(|s| s.trace().j.last().copied());
        Ok(Summary {
            status: if error.is_none() { "ok" } else { "failed" }.into(),
            error: error.map(|e| e.to_string()),
            model: self.model.file.name.clone(),
            horizon: cfg.horizon,
            steps_completed: self.steps,
            seed: cfg.seed,
            attack: cfg.attack.kind,
            gamma: cfg.gamma,
            mu: cfg.mu,
            sigma: cfg.sigma,
            trace_dd,
            b_norm,
            regret: final_regret.map(|r| r.direct),
            regret_telescoped: final_regret.map(|r| r.telescoped),
            bound: regret_bound_from_trace(trace_dd, &constants, cfg.horizon).ok(),
            t_star: constants.t_star,
            p_star: constants.p_star,
            nu_final: constants.nu,
            kappa: constants.kappa,
            epsilon: constants.epsilon,
            m: constants.m,
            m_source: m_source.into(),
            refinement: state
                .and_then(|s| s.refinement())
                .map(|r| RefinementSummary {
                    t: r.t,
                    iterations: r.iterations,
                    c_estimate: r.c_estimate,
                    tail_sum: r.tail_sum,
                    j_before: r.j_before,
                    regret_before: self.regret_before(),
                }),
            normalizer: self.normalizer(),
            violations: state.map_or(0, |s| s.violations()) + self.extra_violations,
            monitored_steps: monitored.len(),
            certificate_failures: certs.iter().filter(|c| !c.passed).count(),
            max_specrad: max_of(&mut { specrads }),
            max_hinf: max_of(&mut { hinfs }),
            max_sequential_gap: max_of(&mut certs.iter().filter_map(|c| c.sequential_gap)),
            dos_max_defect: self.dos_defect,
            j_final: if error.is_none() { j_final } else { None },
            j_star_final: match (state, error) {
                (Some(s), None) => s.trace().j_star.last().copied().flatten(),
                _ => None,
            },
        })
    }
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_HEADER {
        return Err(Error::Schema(format!("unexpected trace header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Schema(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(json_error)
}

/// `(t, bound_t)` for every integer `t` in `[t*, T]`.
pub fn bound_curve(
    constants: &BoundConstants,
    trace_dd: f64,
    horizon: usize,
) -> Result<Vec<(usize, f64)>> {
    if (horizon as f64) < constants.t_star {
        return Err(Error::HorizonBelowBurnIn {
            horizon,
            t_star: constants.t_star,
        });
    }
    (constants.t_star.ceil() as usize..=horizon)
        .map(|t| Ok((t, regret_bound_from_trace(trace_dd, constants, t)?)))
        .collect()
}

/// Writes the bound curve implied by a run summary as `t,bound` CSV and
/// returns the number of rows.
pub fn emit_bound_curve(summary: &Summary, out: &Path) -> Result<usize> {
    let curve = bound_curve(&summary.constants()?, summary.trace_dd, summary.horizon)?;
    let mut file = std::io::BufWriter::new(fs::File::create(out)?);
    writeln!(file, "t,bound")?;
    for (t, b) in &curve {
        writeln!(file, "{t},{b}")?;
    }
    file.flush()?;
    Ok(curve.len())
}
