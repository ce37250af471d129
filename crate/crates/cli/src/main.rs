use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fedqnn::data::CompositionWindow;
use fedqnn::experiment::{
    gen_dna, parse_choice, run_experiment, summarize_run, sweep_clients, sweep_csv,
    DatasetSource, ExperimentConfig, RUNS_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "fedqnn", version, about = "Federated quantum neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of an experiment and write its results to a run directory.
    Run {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Directory under which the run directory is created.
        #[arg(long, env = RUNS_DIR_ENV, default_value = "runs")]
        runs_dir: PathBuf,
    },
    /// Repeat an experiment for several client counts.
    SweepClients {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Client counts, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        clients: Vec<usize>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic promoter / non-promoter DNA set as CSV.
    GenDna {
        #[arg(long = "num_samples", alias = "num-samples", default_value_t = 200)]
        num_samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// `motif` or `sequence`.
        #[arg(long, default_value = "motif")]
        window: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a finished run directory.
    Report { run_dir: PathBuf },
}

/// A config file plus per-field overrides. Flag names follow the algorithm's inputs.
#[derive(Args)]
struct ExperimentArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// iris, breast_cancer, dna or csv:<path>.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long = "num_clients", alias = "num-clients")]
    num_clients: Option<usize>,
    /// Federated rounds.
    #[arg(long = "max_iterations", alias = "max-iterations", alias = "rounds")]
    max_iterations: Option<usize>,
    #[arg(long = "local_iterations", alias = "local-iterations")]
    local_iterations: Option<usize>,
    #[arg(long = "learning_rate", alias = "learning-rate", alias = "step-size")]
    learning_rate: Option<f64>,
    #[arg(long = "num_features_to_use", alias = "num-features-to-use")]
    num_features_to_use: Option<usize>,
    #[arg(long = "num_data_points", alias = "num-data-points")]
    num_data_points: Option<usize>,
    #[arg(long = "num_qubits", alias = "num-qubits")]
    num_qubits: Option<usize>,
    #[arg(long = "num_layers", alias = "num-layers")]
    num_layers: Option<usize>,
    #[arg(long = "test_fraction", alias = "test-fraction")]
    test_fraction: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// fedavg_unweighted or fedavg_weighted.
    #[arg(long)]
    aggregation: Option<String>,
    /// multi_readout or one_vs_rest.
    #[arg(long = "multiclass_strategy", alias = "multiclass-strategy")]
    multiclass_strategy: Option<String>,
    /// in_process or loopback.
    #[arg(long)]
    transport: Option<String>,
    /// strict or tolerate_stragglers.
    #[arg(long)]
    stragglers: Option<String>,
    /// Keep each client's Adam moments across rounds.
    #[arg(long = "persist_adam", alias = "persist-adam")]
    persist_adam: bool,
    /// Use the 100-local-steps, 10-round profile as the base config.
    #[arg(long = "paper_literal", alias = "paper-literal", conflicts_with = "config")]
    paper_literal: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.paper_literal) {
            (Some(path), _) => ExperimentConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))?,
            (None, true) => ExperimentConfig::paper_literal(),
            (None, false) => ExperimentConfig::default(),
        };
        if let Some(d) = &self.dataset {
            cfg.dataset = d.parse::<DatasetSource>()?;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(
            num_clients,
            max_iterations,
            local_iterations,
            learning_rate,
            num_features_to_use,
            num_qubits,
            num_layers,
            test_fraction,
            trials,
            seed
        );
        if self.num_data_points.is_some() {
            cfg.num_data_points = self.num_data_points;
        }
        if let Some(v) = &self.aggregation {
            cfg.aggregation = parse_choice(v)?;
        }
        if let Some(v) = &self.multiclass_strategy {
            cfg.multiclass_strategy = parse_choice(v)?;
        }
        if let Some(v) = &self.transport {
            cfg.transport = parse_choice(v)?;
        }
        if let Some(v) = &self.stragglers {
            cfg.stragglers = parse_choice(v)?;
        }
        if self.persist_adam {
            cfg.persist_adam = true;
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run {
            experiment,
            runs_dir,
        } => {
            let cfg = experiment.resolve()?;
            log::info!("running {} trial(s) on {}", cfg.trials, cfg.dataset);
            let (_, dir) = run_experiment(&cfg, &runs_dir)?;
            print!("{}", summarize_run(&dir)?);
        }
        Command::SweepClients {
            experiment,
            clients,
            out,
        } => {
            let cfg = experiment.resolve()?;
            let table = sweep_csv(&sweep_clients(&cfg, &clients)?);
            match out {
                Some(path) => fs::write(&path, table)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{table}"),
            }
        }
        Command::GenDna {
            num_samples,
            seed,
            window,
            out,
        } => {
            let window: CompositionWindow = parse_choice(&window)?;
            gen_dna(num_samples, seed, window, &out)?;
            eprintln!("wrote {num_samples} samples to {}", out.display());
        }
        Command::Report { run_dir } => {
            if !run_dir.is_dir() {
                bail!("{} is not a run directory", run_dir.display());
            }
            print!("{}", summarize_run(&run_dir)?);
        }
    }
    Ok(())
}
