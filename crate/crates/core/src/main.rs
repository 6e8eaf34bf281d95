use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dselect::calibration::{kappa, slope_heuristic, tau_penalty_constant};
use dselect::estimator::{projection_chain, select_from_chain};
use dselect::harness::config::{ExperimentConfig, OutputConfig, PenaltyConfig, ProcessConfig, ProcessName, RegimeName};
use dselect::harness::rate::{fit_rate, risks_from_csv, summarize, SummaryStatistic};
use dselect::harness::run_to_dir;
use dselect::io::{load_sample, save_sample};
use dselect::processes;
use dselect::{BasisKind, BasisSystem, DensityHandle, Error, ModelCollection, PenaltySpec, ProcessSpec, Result};

#[derive(Parser)]
#[command(name = "dselect", version, about = "Penalized least-squares density estimation for mixing processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample and write it to a file
    Simulate(SimulateArgs),
    /// Select a model for a sample file and print the result as JSON
    Estimate(EstimateArgs),
    /// Run the slope heuristic on a sample file
    Calibrate(CalibrateArgs),
    /// Run a Monte Carlo experiment
    Experiment(ExperimentArgs),
    /// Fit log risk against log n from a replication CSV
    Rate(RateArgs),
}

#[derive(Args, Clone)]
struct ProcessArgs {
    #[arg(long, default_value = "iid")]
    process: String,
    #[arg(long, default_value = "uniform")]
    density: String,
    /// Regeneration probability for `regen`
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long)]
    burn_in: Option<u64>,
}

impl ProcessArgs {
    fn spec(&self) -> Result<ProcessSpec> {
        let density: DensityHandle = self.density.parse().map_err(config_err("--density"))?;
        let spec = match self.process.parse::<ProcessName>()? {
            ProcessName::Iid => ProcessSpec::iid(density),
            ProcessName::Regen => ProcessSpec::regeneration(density, self.delta)?,
            ProcessName::Andrews => ProcessSpec::andrews(),
        };
        Ok(match self.burn_in {
            Some(b) => spec.with_burn_in(b),
            None => spec,
        })
    }
}

fn config_err(flag: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Config(format!("{flag}: {e}"))
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// `bin` or `csv`
    #[arg(long, default_value = "bin")]
    format: String,
}

#[derive(Args)]
struct EstimateArgs {
    sample: PathBuf,
    #[arg(long, default_value = "haar")]
    basis: String,
    #[arg(long = "penalty-regime", default_value = "beta")]
    penalty_regime: String,
    #[arg(long = "K", default_value_t = 4.1)]
    k: f64,
    /// Structural factor for the custom regime
    #[arg(long)]
    slope: Option<f64>,
    /// Process whose mixing bounds set the penalty
    #[command(flatten)]
    process: ProcessArgs,
    /// Write selection.json here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    sample: PathBuf,
    #[arg(long, default_value = "haar")]
    basis: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    process: Option<String>,
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    basis: Option<String>,
    #[arg(long = "penalty-regime")]
    penalty_regime: Option<String>,
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long)]
    slope: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall-clock time per replication
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct RateArgs {
    csv: PathBuf,
    #[arg(long, default_value = "median")]
    statistic: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, file_name: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut w = BufWriter::new(File::create(dir.join(file_name))?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn basis_from(name: &str) -> Result<BasisSystem> {
    let kind: BasisKind = name.parse().map_err(config_err("--basis"))?;
    BasisSystem::from_kind(kind)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    if args.n == 0 {
        return Err(Error::Config("--n: must be at least 1".into()));
    }
    let spec = args.process.spec()?;
    let sample = processes::sample(&spec, args.n, args.seed);
    let ext = match args.format.as_str() {
        "bin" => "bin",
        "csv" => "csv",
        other => return Err(Error::Config(format!("--format: unknown format '{other}'"))),
    };
    fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("sample.{ext}"));
    save_sample(&sample, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let sample = load_sample(&args.sample)?;
    let basis = basis_from(&args.basis)?;
    let n = sample.len();
    let collection = ModelCollection::build(&basis, n)?;
    let process = args.process.spec()?;
    let penalty = match args.penalty_regime.parse::<RegimeName>()? {
        RegimeName::Beta => {
            PenaltySpec::beta(args.k, basis.norm_constants().phi, kappa(&process.beta_rate(), 1)?, n)?
        }
        RegimeName::Tau => {
            let rate = process
                .tau_rate()
                .ok_or_else(|| Error::Config("--penalty-regime: no τ bound for this process".into()))?;
            PenaltySpec::tau(
                args.k,
                tau_penalty_constant(&rate, &basis, process.true_density().l2_norm())?,
                n,
            )?
        }
        RegimeName::Custom => {
            let slope = args
                .slope
                .ok_or_else(|| Error::Config("--slope: required for the custom regime".into()))?;
            PenaltySpec::custom(args.k, slope, n)?
        }
        RegimeName::Calibrate => {
            return Err(Error::Config(
                "--penalty-regime: use the calibrate subcommand for a single sample".into(),
            ))
        }
    };
    let chain = projection_chain(&sample, &collection)?;
    let selection = select_from_chain(&chain, &penalty)?;
    emit(&selection.report(), args.out.as_deref(), "selection.json")
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let sample = load_sample(&args.sample)?;
    let basis = basis_from(&args.basis)?;
    let collection = ModelCollection::build(&basis, sample.len())?;
    let chain = projection_chain(&sample, &collection)?;
    let dims: Vec<usize> = chain.iter().map(|e| e.dimension()).collect();
    let contrasts: Vec<f64> = chain.iter().map(|e| e.contrast).collect();
    let report = slope_heuristic(&dims, &contrasts, sample.len())?;
    emit(&report, args.out.as_deref(), "calibration.json")
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            seed: 0,
            replications: 1,
            sample_sizes: vec![1024],
            basis: "haar".into(),
            process: ProcessConfig {
                kind: ProcessName::Iid,
                density: "uniform".into(),
                delta: None,
                burn_in: None,
            },
            penalty: PenaltyConfig {
                regime: RegimeName::Beta,
                k: 4.1,
                slope: None,
            },
            threads: 0,
            timing: false,
            outputs: OutputConfig::default(),
        },
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(p) = &args.process {
        config.process.kind = p.parse()?;
    }
    if let Some(d) = args.density {
        config.process.density = d;
    }
    if let Some(delta) = args.delta {
        config.process.delta = Some(delta);
    }
    if config.process.kind == ProcessName::Regen && config.process.delta.is_none() {
        config.process.delta = Some(0.5);
    }
    if let Some(b) = args.basis {
        config.basis = b;
    }
    if let Some(r) = &args.penalty_regime {
        config.penalty.regime = r.parse()?;
    }
    if let Some(k) = args.k {
        config.penalty.k = k;
    }
    if let Some(s) = args.slope {
        config.penalty.slope = Some(s);
    }
    if let Some(reps) = args.reps {
        config.replications = reps;
    }
    if let Some(n) = args.n {
        config.sample_sizes = n;
    }
    if let Some(t) = args.threads {
        config.threads = t;
    }
    if let Some(out) = args.out {
        config.outputs.dir = out;
    }
    config.timing |= args.timing;
    let dir = config.outputs.dir.clone();
    let result = run_to_dir(&config, &dir)?;
    for s in &result.summaries {
        println!(
            "n={} median_risk={:.6e} median_oracle_ratio={:.4} median_theorem_ratio={:.4}",
            s.n, s.median_risk, s.median_oracle_ratio, s.median_theorem_ratio
        );
    }
    Ok(())
}

fn rate(args: RateArgs) -> Result<()> {
    let statistic: SummaryStatistic = args.statistic.parse()?;
    let per_n = risks_from_csv(File::open(&args.csv)?)?;
    let fit = fit_rate(&summarize(&per_n, statistic))?;
    emit(&fit, args.out.as_deref(), "rate.json")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Experiment(a) => experiment(a),
        Command::Rate(a) => rate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
