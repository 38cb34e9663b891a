use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polysplit::experiments::{
    run_power_experiment, run_simulation, run_size_experiment, run_snr_experiment, run_stability_experiment, run_test,
    load_test_inputs, thread_pool,
};
use polysplit::output::{emit, render, Format};
use polysplit::{CliError, ExperimentConfig, Mode};
use polysplit_core::GlmFamily;

/// Adaptive polygenic association test by repeated sample splitting.
#[derive(Parser)]
#[command(name = "polysplit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file (a directory for `simulate`); standard output if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the test on genotype and phenotype files.
    Test(TestArgs),
    /// Write one simulated data set.
    Simulate,
    /// Empirical size under the null over a (rho, J) grid.
    Calibrate {
        /// Replicates per cell (overrides the configuration).
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Power curves over effect sizes and screening scenarios.
    Power {
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Variability of single-split and multi-split p-values on one data set.
    Stability,
    /// Signal-to-noise diagnostics.
    Snr,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    genotypes: Option<PathBuf>,
    #[arg(long)]
    phenotype: Option<PathBuf>,
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// gaussian or binomial.
    #[arg(long)]
    family: Option<GlmFamily>,
    /// Number of sample splits.
    #[arg(long)]
    splits: Option<usize>,
    /// Use genotype columns as given instead of centring and scaling them.
    #[arg(long)]
    no_standardize: bool,
}

fn mode_of(cmd: &Command) -> Mode {
    match cmd {
        Command::Test(_) => Mode::Test,
        Command::Simulate => Mode::Simulate,
        Command::Calibrate { .. } => Mode::Calibrate,
        Command::Power { .. } => Mode::Power,
        Command::Stability => Mode::Stability,
        Command::Snr => Mode::Snr,
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mode = mode_of(&cli.command);
    let mut cfg = match &cli.common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.mode != mode {
                log::warn!("configuration mode {:?} ignored; running {:?}", cfg.mode, mode);
            }
            cfg
        }
        None => ExperimentConfig::new(mode),
    };
    cfg.mode = mode;
    if let Some(seed) = cli.common.seed {
        cfg.master_seed = seed;
    }
    if let Some(w) = cli.common.workers {
        cfg.workers = w;
    }
    if cli.common.out.is_some() {
        cfg.output = cli.common.out.clone();
    }
    match &cli.command {
        Command::Test(a) => {
            if a.genotypes.is_some() {
                cfg.data.genotypes = a.genotypes.clone();
            }
            if a.phenotype.is_some() {
                cfg.data.phenotype = a.phenotype.clone();
            }
            if a.covariates.is_some() {
                cfg.data.covariates = a.covariates.clone();
            }
            if let Some(f) = a.family {
                cfg.test.family = f;
            }
            if let Some(m) = a.splits {
                cfg.test.splits = m;
            }
            if a.no_standardize {
                cfg.data.standardize = false;
            }
        }
        Command::Calibrate { replicates } | Command::Power { replicates } => {
            if let Some(r) = replicates {
                cfg.replicates = *r;
            }
        }
        _ => {}
    }
    cfg.test.master_seed = cfg.master_seed;
    if mode == Mode::Calibrate && cfg.design.is_none() {
        cfg.design = Some(cfg.design_or_default());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    let pool = thread_pool(cfg.workers)?;
    let out = cfg.output.as_deref();
    let format = cli.common.format;
    let text = match cfg.mode {
        Mode::Test => {
            let inputs = load_test_inputs(&cfg)?;
            log::info!("testing {} individuals, {} variants, {} splits", inputs.y.len(), inputs.g.n_variants(), cfg.test.splits);
            render(&run_test(&inputs, &cfg.test, &pool)?, format)?
        }
        Mode::Simulate => {
            let dir = out.ok_or_else(|| CliError::Input("simulate needs --out <directory>".into()))?;
            let truth = run_simulation(&cfg, dir)?;
            log::info!("wrote simulated data to {}", dir.display());
            render(&truth, format)?
        }
        Mode::Calibrate => render(&run_size_experiment(&cfg, &pool)?, format)?,
        Mode::Power => render(&run_power_experiment(&cfg, &pool)?, format)?,
        Mode::Stability => render(&run_stability_experiment(&cfg, &pool)?, format)?,
        Mode::Snr => render(&run_snr_experiment(&cfg, &pool)?, format)?,
    };
    // simulate writes its files into the directory; the summary goes to stdout
    let target = if cfg.mode == Mode::Simulate { None } else { out };
    emit(&text, target)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).target(env_logger::Target::Stderr).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
