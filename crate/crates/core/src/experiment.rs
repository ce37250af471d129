//! Config-driven, seeded end-to-end experiments.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    breast_cancer, iris, load_csv, split_and_partition, CompositionWindow, CsvSchema, Dataset,
    DnaGenerator, FeatureScaler,
};
use crate::error::{Error, Result};
use crate::federated::{
    run_round, AggregationMode, FederatedClient, GlobalModel, InProcessTransport,
    LoopbackTransport, RoundPolicy, Server, StragglerPolicy, Transport,
};
use crate::metrics::{
    aggregate_trials, classification_report, mean_curve_csv, trajectory_csv, ClassificationReport,
    MeanCurve, RoundRecord, TrajectoryLog,
};
use crate::qnn::{Classifier, MulticlassStrategy, ParameterVector};
use crate::training::AdamConfig;

/// Environment variable naming the directory under which run directories are created.
pub const RUNS_DIR_ENV: &str = "FEDQNN_RUNS_DIR";
pub const DEFAULT_RUNS_DIR: &str = "runs";
/// Rows generated for the synthetic DNA set when `num_data_points` is unset.
pub const DEFAULT_DNA_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSource {
    Iris,
    BreastCancer,
    Dna,
    /// A CSV file whose last column is the label.
    Csv(PathBuf),
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Iris => f.write_str("iris"),
            Self::BreastCancer => f.write_str("breast_cancer"),
            Self::Dna => f.write_str("dna"),
            Self::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

impl FromStr for DatasetSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iris" => Ok(Self::Iris),
            "breast_cancer" | "breast-cancer" => Ok(Self::BreastCancer),
            "dna" => Ok(Self::Dna),
            other => match other.strip_prefix("csv:") {
                Some(path) if !path.is_empty() => Ok(Self::Csv(PathBuf::from(path))),
                _ => Err(Error::Config(format!(
                    "unknown dataset '{other}' (expected iris, breast_cancer, dna or csv:<path>)"
                ))),
            },
        }
    }
}

impl Serialize for DatasetSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DatasetSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    #[default]
    InProcess,
    Loopback,
}

impl TransportKind {
    fn build(self) -> Box<dyn Transport> {
        match self {
            Self::InProcess => Box::new(InProcessTransport),
            Self::Loopback => Box::new(LoopbackTransport),
        }
    }
}

/// Everything needed to reproduce a run. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub num_qubits: usize,
    pub num_layers: usize,
    pub num_clients: usize,
    /// Federated rounds per trial.
    #[serde(alias = "rounds")]
    pub max_iterations: usize,
    /// Adam steps each client takes per round.
    pub local_iterations: usize,
    #[serde(alias = "step_size")]
    pub learning_rate: f64,
    pub test_fraction: f64,
    pub num_features_to_use: usize,
    pub trials: usize,
    pub seed: u64,
    pub aggregation: AggregationMode,
    pub multiclass_strategy: MulticlassStrategy,
    /// Optional subsample size; for the DNA set, the number of generated rows.
    pub num_data_points: Option<usize>,
    pub persist_adam: bool,
    pub transport: TransportKind,
    pub stragglers: StragglerPolicy,
    pub round_timeout_secs: u64,
    pub dna_window: CompositionWindow,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Iris,
            num_qubits: 4,
            num_layers: 4,
            num_clients: 3,
            max_iterations: 100,
            local_iterations: 1,
            learning_rate: 0.1,
            test_fraction: 0.2,
            num_features_to_use: 4,
            trials: 10,
            seed: 0,
            aggregation: AggregationMode::default(),
            multiclass_strategy: MulticlassStrategy::default(),
            num_data_points: None,
            persist_adam: false,
            transport: TransportKind::default(),
            stragglers: StragglerPolicy::default(),
            round_timeout_secs: 60,
            dna_window: CompositionWindow::default(),
        }
    }
}

impl ExperimentConfig {
    /// The "paper-literal" reading: 100 local steps per round over fewer rounds.
    pub fn paper_literal() -> Self {
        Self {
            local_iterations: 100,
            max_iterations: 10,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// The resolved config with every default spelled out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(1..=crate::sim::MAX_QUBITS).contains(&self.num_qubits) {
            problems.push(format!(
                "num_qubits must be in 1..={}, got {}",
                crate::sim::MAX_QUBITS,
                self.num_qubits
            ));
        }
        if self.num_layers == 0 {
            problems.push("num_layers must be at least 1".to_string());
        }
        if self.num_clients == 0 {
            problems.push("num_clients must be at least 1".to_string());
        }
        if self.max_iterations == 0 {
            problems.push("max_iterations (rounds) must be at least 1".to_string());
        }
        if self.local_iterations == 0 {
            problems.push("local_iterations must be at least 1".to_string());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            problems.push(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            problems.push(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if self.num_features_to_use == 0 {
            problems.push("num_features_to_use must be at least 1".to_string());
        }
        if self.num_features_to_use > self.num_qubits {
            problems.push(format!(
                "num_features_to_use ({}) exceeds num_qubits ({})",
                self.num_features_to_use, self.num_qubits
            ));
        }
        if self.trials == 0 {
            problems.push("trials must be at least 1".to_string());
        }
        if self.num_data_points == Some(0) {
            problems.push("num_data_points must be at least 1 when set".to_string());
        }
        if self.dataset == DatasetSource::Dna {
            if let Some(n) = self.num_data_points {
                if n % 2 != 0 {
                    problems.push(format!("num_data_points for dna must be even, got {n}"));
                }
            }
        }
        if self.round_timeout_secs == 0 {
            problems.push("round_timeout_secs must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Hex SHA-256 of the resolved config.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(hex::encode(digest))
    }

    /// Directory name under the runs root: config hash prefix plus seed.
    pub fn run_name(&self) -> Result<String> {
        Ok(format!("{}-seed{}", &self.hash()?[..16], self.seed))
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            step_size: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// Parses a snake_case choice such as `fedavg_weighted` into a config enum.
pub fn parse_choice<T: serde::de::DeserializeOwned>(value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.replace('-', "_")))
        .map_err(|e| Error::Config(format!("'{value}': {e}")))
}

/// Loads the configured dataset, applying the optional subsample.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let ds = match &config.dataset {
        DatasetSource::Iris => iris()?.0,
        DatasetSource::BreastCancer => breast_cancer()?.0,
        DatasetSource::Dna => {
            let generator = DnaGenerator {
                window: config.dna_window,
                ..DnaGenerator::default()
            };
            let n = config.num_data_points.unwrap_or(DEFAULT_DNA_SAMPLES);
            return Ok(generator.generate(n, config.seed)?.dataset);
        }
        DatasetSource::Csv(path) => {
            let label = last_header_column(path)?;
            load_csv(path, &CsvSchema::with_label(label))?.0
        }
    };
    match config.num_data_points {
        Some(n) if n < ds.len() => {
            let mut idx: Vec<usize> = (0..ds.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
            idx.truncate(n);
            idx.sort_unstable();
            let sub = ds.subset(&idx);
            sub.validate()?;
            Ok(sub)
        }
        _ => Ok(ds),
    }
}

fn last_header_column(path: &Path) -> Result<String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Ingestion {
        line: 1,
        message: e.to_string(),
    })?;
    let headers = rdr.headers().map_err(|e| Error::Ingestion {
        line: 1,
        message: e.to_string(),
    })?;
    headers
        .iter()
        .next_back()
        .map(str::to_string)
        .ok_or_else(|| Error::Ingestion {
            line: 1,
            message: "empty header".into(),
        })
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub trajectory: TrajectoryLog,
    pub final_report: ClassificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub mean_curve: MeanCurve,
}

impl ExperimentResult {
    pub fn logs(&self) -> Vec<TrajectoryLog> {
        self.trials.iter().map(|t| t.trajectory.clone()).collect()
    }

    pub fn mean_final_accuracy(&self) -> f64 {
        self.mean_curve.final_accuracy().unwrap_or(0.0)
    }

    pub fn trajectory_csv(&self) -> String {
        trajectory_csv(&self.logs())
    }
}

/// Seeds for each trial, drawn from a generator keyed on the base seed.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.next_u64()).collect()
}

/// Parameters drawn uniformly from `[0, 2π)`.
pub fn initial_parameters(num_params: usize, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..num_params)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    ParameterVector::new(values).expect("uniform draws are finite")
}

fn run_trial(config: &ExperimentConfig, ds: &Dataset, trial: usize, seed: u64) -> Result<TrialResult> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let split_seed = seeds.next_u64();
    let init_seed = seeds.next_u64();

    let split = split_and_partition(ds, config.test_fraction, config.num_clients, split_seed)?;
    let scaler = FeatureScaler::fit(&ds.subset(&split.train), config.num_features_to_use)?;
    let scaled = scaler.transform(ds);
    let test = scaled.subset(&split.test);

    let classifier = Classifier::new(
        config.num_qubits,
        config.num_layers,
        ds.num_classes(),
        config.multiclass_strategy,
    )?;
    let global = GlobalModel {
        params: initial_parameters(classifier.num_params(), init_seed),
        round: 0,
    };
    let policy = RoundPolicy {
        aggregation: config.aggregation,
        stragglers: config.stragglers,
        timeout: Duration::from_secs(config.round_timeout_secs),
    };
    let mut server = Server::new(classifier, test.clone(), global, policy)?;
    let mut clients = split
        .client_shards
        .iter()
        .enumerate()
        .map(|(k, shard)| {
            let id = k as u32;
            server.register(id)?;
            Ok(FederatedClient::new(
                id,
                scaled.subset(shard),
                config.local_iterations,
                config.adam(),
            )?
            .persist_adam(config.persist_adam))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut transport = config.transport.build();
    let mut trajectory = TrajectoryLog::new(trial);
    let mut last_predictions = Vec::new();
    for _ in 0..config.max_iterations {
        let outcome = run_round(&mut server, &mut clients, transport.as_mut())?;
        trajectory.push(RoundRecord {
            round: outcome.metrics.round as usize,
            accuracy: outcome.metrics.accuracy,
            loss: outcome.metrics.loss,
        })?;
        last_predictions = outcome.predictions;
    }
    let final_report = classification_report(&last_predictions, &test.labels, ds.num_classes())?;
    Ok(TrialResult {
        trial,
        seed,
        trajectory,
        final_report,
    })
}

/// Runs every trial of `config` in memory. Deterministic in the config.
pub fn run_trials(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let ds = load_dataset(config)?;
    ds.validate()?;
    let seeds = trial_seeds(config.seed, config.trials);
    // Plain threads, not the rayon pool: rounds block on client threads that
    // themselves use the pool.
    let trials = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .enumerate()
            .map(|(t, &s)| {
                let ds = &ds;
                scope.spawn(move || run_trial(config, ds, t, s))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Numeric("trial thread panicked".into())))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let logs: Vec<TrajectoryLog> = trials.iter().map(|t| t.trajectory.clone()).collect();
    let mean_curve = aggregate_trials(&logs)?;
    Ok(ExperimentResult {
        config: config.clone(),
        trials,
        mean_curve,
    })
}

/// `FEDQNN_RUNS_DIR`, or `runs` in the working directory.
pub fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_RUNS_DIR))
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    dataset: String,
    trials: usize,
    mean_final_accuracy: f64,
    std_final_accuracy: f64,
    final_reports: Vec<&'a ClassificationReport>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs the experiment and writes `config.toml`, `trajectory.csv`,
/// `mean_curve.csv` and `report.json` into `<root>/<hash>-seed<seed>/`.
pub fn run_experiment(config: &ExperimentConfig, root: &Path) -> Result<(ExperimentResult, PathBuf)> {
    let result = run_trials(config)?;
    let dir = root.join(config.run_name()?);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join("config.toml"), &config.to_toml()?)?;
    write_file(&dir.join("trajectory.csv"), &result.trajectory_csv())?;
    write_file(&dir.join("mean_curve.csv"), &mean_curve_csv(&result.mean_curve))?;
    let report = RunReport {
        dataset: config.dataset.to_string(),
        trials: result.trials.len(),
        mean_final_accuracy: result.mean_final_accuracy(),
        std_final_accuracy: result.mean_curve.std_accuracy.last().copied().unwrap_or(0.0),
        final_reports: result.trials.iter().map(|t| &t.final_report).collect(),
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    write_file(&dir.join("report.json"), &(json + "\n"))?;
    Ok((result, dir))
}

/// Mean final accuracy for each client count, with all other settings shared.
pub fn sweep_clients(config: &ExperimentConfig, client_counts: &[usize]) -> Result<Vec<(usize, f64)>> {
    if client_counts.is_empty() {
        return Err(Error::Config("no client counts given".into()));
    }
    let mut seen = BTreeSet::new();
    for &k in client_counts {
        if k == 0 {
            return Err(Error::Config("client counts must be at least 1".into()));
        }
        if !seen.insert(k) {
            return Err(Error::Config(format!("client count {k} listed twice")));
        }
    }
    client_counts
        .iter()
        .map(|&k| {
            let cfg = ExperimentConfig {
                num_clients: k,
                ..config.clone()
            };
            Ok((k, run_trials(&cfg)?.mean_final_accuracy()))
        })
        .collect()
}

pub fn sweep_csv(rows: &[(usize, f64)]) -> String {
    let mut out = String::from("num_clients,mean_final_accuracy\n");
    for (k, acc) in rows {
        let _ = writeln!(out, "{k},{acc}");
    }
    out
}

/// Writes a generated DNA set as CSV (`frac_a,frac_c,frac_g,frac_t,class`).
/// Arguments are validated before anything touches the file system.
pub fn gen_dna(num_samples: usize, seed: u64, window: CompositionWindow, out: &Path) -> Result<()> {
    let generator = DnaGenerator {
        window,
        ..DnaGenerator::default()
    };
    let ds = generator.generate(num_samples, seed)?.dataset;
    let mut text = ds.feature_names.join(",");
    text.push_str(",class\n");
    for (row, &label) in ds.features.iter().zip(&ds.labels) {
        for v in row {
            let _ = write!(text, "{v},");
        }
        text.push_str(&ds.class_names[label]);
        text.push('\n');
    }
    write_file(out, &text)
}

/// Human-readable summary of a run directory.
pub fn summarize_run(dir: &Path) -> Result<String> {
    let config = ExperimentConfig::load(dir.join("config.toml"))?;
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let report: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
    let mut out = String::new();
    let _ = writeln!(out, "run:        {}", dir.display());
    let _ = writeln!(out, "dataset:    {}", config.dataset);
    let _ = writeln!(
        out,
        "clients:    {}  rounds: {}  local iterations: {}",
        config.num_clients, config.max_iterations, config.local_iterations
    );
    let _ = writeln!(out, "trials:     {}", config.trials);
    let _ = writeln!(
        out,
        "accuracy:   {:.4} ± {:.4}",
        report["mean_final_accuracy"].as_f64().unwrap_or(f64::NAN),
        report["std_final_accuracy"].as_f64().unwrap_or(f64::NAN)
    );
    if let Some(reports) = report["final_reports"].as_array() {
        let f1: Vec<f64> = reports.iter().filter_map(|r| r["f1"].as_f64()).collect();
        if !f1.is_empty() {
            let _ = writeln!(out, "macro F1:   {:.4}", f1.iter().sum::<f64>() / f1.len() as f64);
        }
    }
    Ok(out)
}
