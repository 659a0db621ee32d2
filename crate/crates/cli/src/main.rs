use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shrinklp::harness::{
    emit_plots, estimate_files, generate_bundle, parse_float_list, parse_usize_list, run_sweep, ExperimentConfig,
    HarnessError, Profile, SweepMode,
};
use shrinklp::{Innovation, NoiseModel, ScenarioSpec};

/// Failure rate above which `simulate` exits with status 3.
const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Parser)]
#[command(name = "shrinklp", version, about = "Linear shrinkage for noisy LP constraint matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a nominal / shrinkage / robust comparison sweep.
    Simulate(SimulateArgs),
    /// Render SVG figures from an aggregate CSV.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate A* = αĀ + βU from observation CSVs.
    Estimate {
        /// Observation matrices, one CSV per sample.
        #[arg(long, num_args = 2.., required = true)]
        samples: Vec<PathBuf>,
        /// Target matrix CSV; defaults to all ones.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        clamp: bool,
        /// Where to write A*.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one synthetic instance and its observations as CSV files.
    Generate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = NoiseArg::Iid)]
        noise: NoiseArg,
        #[arg(long, value_enum, default_value_t = InnovationArg::Gaussian)]
        innovation: InnovationArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file mirroring the experiment configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Constraint-to-variable ratios: `0.5,1,2` or `start:stop:step`.
    #[arg(long)]
    c: Option<String>,
    /// Variable counts: `100,200` or `100:900:100`.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Robust radii as multiples of σ; pass `none` for no robust runs.
    #[arg(long)]
    gamma_factors: Option<String>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "no_clamp")]
    clamp: bool,
    #[arg(long)]
    no_clamp: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Leave `solve_time_ms` empty so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FixedC,
    FixedP,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Iid,
    ColCorr,
    RowCorr,
}

impl From<NoiseArg> for NoiseModel {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Iid => NoiseModel::IidGaussian,
            NoiseArg::ColCorr => NoiseModel::ColumnCorrelated,
            NoiseArg::RowCorr => NoiseModel::RowCorrelated,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InnovationArg {
    Gaussian,
    Uniform,
}

enum Failure {
    Config(String),
    Runtime(String),
    FailureRate(f64),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Json(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn build_config(args: &SimulateArgs) -> Result<ExperimentConfig, Failure> {
    let mode = match args.mode {
        Some(ModeArg::FixedP) => SweepMode::FixedPVaryC,
        _ => SweepMode::FixedCVaryP,
    };
    let profile = match args.profile {
        Some(ProfileArg::Paper) => Profile::Paper,
        _ => Profile::Desk,
    };
    let mut cfg = ExperimentConfig::profile(profile, mode);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let overlay: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let serde_json::Value::Object(fields) = overlay else {
            return Err(Failure::Config(format!("{} must hold a JSON object", path.display())));
        };
        let mut base = serde_json::to_value(&cfg).expect("config serializes");
        base.as_object_mut().expect("config is an object").extend(fields);
        cfg = serde_json::from_value(base).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    }
    if args.mode.is_some() {
        cfg.sweep_mode = mode;
    }
    if let Some(c) = &args.c {
        cfg.c_values = parse_float_list(c)?;
    }
    if let Some(p) = &args.p {
        cfg.p_values = parse_usize_list(p)?;
    }
    if let Some(s) = &args.sigma {
        cfg.sigma_list = parse_float_list(s)?;
    }
    if let Some(g) = &args.gamma_factors {
        cfg.gamma_factors = if g.trim() == "none" { Vec::new() } else { parse_float_list(g)? };
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    if let Some(noise) = args.noise {
        cfg.noise_model = noise.into();
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if args.clamp {
        cfg.clamp = true;
    }
    if args.no_clamp {
        cfg.clamp = false;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if args.no_timing {
        cfg.record_timing = false;
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = build_config(&args)?;
            let summary = run_sweep(&cfg)?;
            let rate = summary.failure_rate();
            println!(
                "wrote {} records to {} and aggregates to {} (failure rate {:.2}%)",
                summary.records.len(),
                summary.csv_path.display(),
                summary.aggregate_path.display(),
                100.0 * rate
            );
            if rate > MAX_FAILURE_RATE {
                return Err(Failure::FailureRate(rate));
            }
        }
        Command::Plot { input, out } => {
            let files = emit_plots(&input, &out)?;
            println!("wrote {} SVG files to {}", files.len(), out.display());
        }
        Command::Estimate {
            samples,
            target,
            clamp,
            out,
        } => {
            let report = estimate_files(&samples, target.as_deref(), clamp, &out)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
        }
        Command::Generate {
            m,
            p,
            n,
            sigma,
            noise,
            innovation,
            seed,
            stream,
            out,
        } => {
            let spec = ScenarioSpec {
                noise_model: noise.into(),
                innovation: match innovation {
                    InnovationArg::Gaussian => Innovation::Gaussian,
                    InnovationArg::Uniform => Innovation::Uniform,
                },
                ..ScenarioSpec::iid(m, p, n, sigma)
            };
            spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
            let manifest = generate_bundle(&spec, seed, stream, &out)?;
            println!(
                "wrote instance and {} observations to {}",
                manifest.observations.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::FailureRate(rate)) => {
            eprintln!(
                "error: solver failure rate {:.2}% exceeds {:.0}%",
                100.0 * rate,
                100.0 * MAX_FAILURE_RATE
            );
            ExitCode::from(3)
        }
    }
}
