use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;

use hmix_core::adversary::{AttackConfig, AttackKind};
use hmix_core::bench::{
    emit_bound_curve, load_model, read_summary, run_experiment, ExperimentConfig, K1Source,
    Monitor, Summary,
};
use hmix_core::numkernel::spectral_radius;
use hmix_core::online::MConstant;
use hmix_core::Error;

#[derive(Parser)]
#[command(
    name = "hmix",
    version,
    about = "Online mixed H2/H-infinity state-feedback experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attack {
    Arbitrary,
    Dos,
}

#[derive(Subcommand)]
enum Command {
    /// Load a model file and run the plant checks.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the online loop under an attack and write trace.csv, summary.json
    /// and config.echo.json.
    Run(RunArgs),
    /// Write the regret-bound curve implied by a run summary.
    Bound {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    horizon: usize,
    #[arg(long, value_enum, default_value = "arbitrary")]
    attack: Attack,
    /// first step of the DoS window (default T/4)
    #[arg(long)]
    dos_start: Option<usize>,
    /// last step of the DoS window (default T/2)
    #[arg(long)]
    dos_end: Option<usize>,
    /// defaults to the model file's value
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// fixed regret constant m; estimated at the burn-in step when absent
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    #[arg(long)]
    out: PathBuf,
    /// emit every n-th step (default 1 up to T = 1000, else 10)
    #[arg(long)]
    stride: Option<usize>,
    /// relative size of the cost perturbations
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// disturbance radius (defaults to the model file's value)
    #[arg(long)]
    w_max: Option<f64>,
    /// JSON nested array with the initial gain
    #[arg(long)]
    k1: Option<PathBuf>,
    /// closed-loop checks: every step, emitted rows only, or spectral
    /// radius at emitted rows
    #[arg(long, value_enum, default_value = "full")]
    monitor: MonitorArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MonitorArg {
    Full,
    Rows,
    Off,
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_validation() {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn validate(path: &Path) -> Result<(), Error> {
    let model = load_model(path)?;
    let sys = &model.sys;
    println!(
        "{}: {} states, {} inputs, {} disturbances, {} outputs, open-loop spectral radius {:.6}, stabilizable",
        model.file.name,
        sys.states(),
        sys.inputs(),
        sys.disturbances(),
        sys.outputs(),
        spectral_radius(sys.a())?
    );
    Ok(())
}

fn build_configs(args: &RunArgs) -> Result<Vec<ExperimentConfig>, Error> {
    let model = load_model(&args.model)?;
    let kind = match args.attack {
        Attack::Arbitrary => AttackKind::Arbitrary,
        Attack::Dos => AttackKind::DenialOfService,
    };
    if args.replicas == 0 {
        return Err(Error::InvalidConfig("--replicas must be at least 1".into()));
    }
    let configs = (0..args.replicas)
        .map(|i| {
            let seed = args.seed.wrapping_add(i as u64);
            let out = if args.replicas == 1 {
                args.out.clone()
            } else {
                args.out.join(format!("replica_{i:03}"))
            };
            let mut cfg = ExperimentConfig::for_model(
                &args.model,
                &model.file,
                args.horizon,
                kind,
                seed,
                &out,
            );
            if kind == AttackKind::DenialOfService {
                let (a, b) = AttackConfig::default_dos_window(args.horizon);
                cfg.attack.dos_window =
                    Some((args.dos_start.unwrap_or(a), args.dos_end.unwrap_or(b)));
            }
            if let Some(w) = args.w_max {
                cfg.attack.w_max = w;
            }
            cfg.gamma = args.gamma.unwrap_or(cfg.gamma);
            cfg.mu = args.mu.unwrap_or(cfg.mu);
            cfg.sigma = args.sigma.unwrap_or(cfg.sigma);
            cfg.cost_perturb.mu = cfg.mu;
            cfg.cost_perturb.sigma = cfg.sigma;
            cfg.cost_perturb.delta = args.delta;
            cfg.k1_source = match &args.k1 {
                Some(p) => K1Source::File(p.clone()),
                None => K1Source::Stationary {
                    gamma_init: cfg.gamma,
                },
            };
            if let Some(m) = args.m {
                cfg.m = MConstant::Fixed(m);
            }
            if let Some(s) = args.stride {
                cfg.trace_stride = s;
            }
            cfg.monitor = match args.monitor {
                MonitorArg::Full => Monitor::Full,
                MonitorArg::Rows => Monitor::Rows,
                MonitorArg::Off => Monitor::Off,
            };
            cfg
        })
        .collect::<Vec<_>>();
    for cfg in &configs {
        cfg.validate()?;
    }
    Ok(configs)
}

fn describe(summary: &Summary) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| format!("{v:.6e}"));
    format!(
        "seed {}: regret {} bound {} t* {:.1} nu {:.6} violations {}",
        summary.seed,
        opt(summary.regret),
        opt(summary.bound),
        summary.t_star,
        summary.nu_final,
        summary.violations
    )
}

fn run(args: &RunArgs) -> ExitCode {
    let configs = match build_configs(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    info!("running {} replica(s)", configs.len());
    let results: Vec<_> = configs.par_iter().map(run_experiment).collect();
    let mut worst = ExitCode::SUCCESS;
    let mut failed = false;
    for (cfg, result) in configs.iter().zip(results) {
        match result {
            Ok(outcome) => println!("{}", describe(&outcome.summary)),
            Err(e) => {
                eprintln!("seed {}: error: {e}", cfg.seed);
                if !failed {
                    worst = exit_code(&e);
                    failed = true;
                }
            }
        }
    }
    worst
}

fn bound(summary: &Path, out: &Path) -> Result<(), Error> {
    let summary = read_summary(summary)?;
    let rows = emit_bound_curve(&summary, out)?;
    println!("wrote {rows} rows to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { model } => validate(model),
        Command::Run(args) => return run(args),
        Command::Bound { summary, out } => bound(summary, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
