use std::fs;

use fedqnn::experiment::{
    gen_dna, load_dataset, run_experiment, run_trials, summarize_run, sweep_clients, sweep_csv,
    DatasetSource, ExperimentConfig, TransportKind,
};
use fedqnn::data::{load_csv, CompositionWindow, CsvSchema};
use fedqnn::Error;

fn small(dataset: DatasetSource) -> ExperimentConfig {
    ExperimentConfig {
        dataset,
        max_iterations: 3,
        trials: 2,
        seed: 7,
        ..ExperimentConfig::default()
    }
}

#[test]
fn repeated_runs_write_identical_trajectories() {
    let root = tempfile::tempdir().unwrap();
    let cfg = small(DatasetSource::Iris);
    let (_, dir_a) = run_experiment(&cfg, &root.path().join("a")).unwrap();
    let (_, dir_b) = run_experiment(&cfg, &root.path().join("b")).unwrap();
    assert_eq!(dir_a.file_name(), dir_b.file_name());
    for file in ["trajectory.csv", "mean_curve.csv", "report.json", "config.toml"] {
        assert_eq!(
            fs::read(dir_a.join(file)).unwrap(),
            fs::read(dir_b.join(file)).unwrap(),
            "{file} differs"
        );
    }
    let resolved = ExperimentConfig::load(dir_a.join("config.toml")).unwrap();
    assert_eq!(resolved, cfg);
    let csv = fs::read_to_string(dir_a.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(summarize_run(&dir_a).unwrap().contains("iris"));
}

#[test]
fn transports_give_identical_results() {
    let cfg = small(DatasetSource::Iris);
    let over_socket = ExperimentConfig {
        transport: TransportKind::Loopback,
        ..cfg.clone()
    };
    assert_eq!(
        run_trials(&cfg).unwrap().trajectory_csv(),
        run_trials(&over_socket).unwrap().trajectory_csv()
    );
}

#[test]
fn zero_rounds_rejected() {
    let cfg = ExperimentConfig {
        max_iterations: 0,
        ..ExperimentConfig::default()
    };
    assert!(matches!(run_trials(&cfg), Err(Error::Config(_))));
}

#[test]
fn dna_trials_produce_one_log_each() {
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Dna,
        max_iterations: 2,
        trials: 10,
        ..ExperimentConfig::default()
    };
    let result = run_trials(&cfg).unwrap();
    assert_eq!(result.trials.len(), 10);
    assert_eq!(result.mean_curve.trials, 10);
    assert_eq!(result.mean_curve.rounds, vec![1, 2]);
    let trials: Vec<usize> = result.trials.iter().map(|t| t.trial).collect();
    assert_eq!(trials, (0..10).collect::<Vec<_>>());
}

#[test]
fn sweep_of_one_matches_plain_run() {
    let cfg = ExperimentConfig {
        num_clients: 1,
        ..small(DatasetSource::Iris)
    };
    let rows = sweep_clients(&cfg, &[1]).unwrap();
    assert_eq!(rows, vec![(1, run_trials(&cfg).unwrap().mean_final_accuracy())]);
    assert!(sweep_csv(&rows).starts_with("num_clients,mean_final_accuracy\n1,"));
}

#[test]
fn sweep_rejects_bad_counts() {
    let cfg = small(DatasetSource::Iris);
    assert!(matches!(sweep_clients(&cfg, &[1, 2, 1]), Err(Error::Config(_))));
    assert!(matches!(sweep_clients(&cfg, &[0]), Err(Error::Config(_))));
    assert!(matches!(sweep_clients(&cfg, &[]), Err(Error::Config(_))));
}

#[test]
fn gen_dna_writes_loadable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    gen_dna(200, 42, CompositionWindow::Motif, &a).unwrap();
    gen_dna(200, 42, CompositionWindow::Motif, &b).unwrap();
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 201);
    assert_eq!(text.lines().next().unwrap(), "frac_a,frac_c,frac_g,frac_t,class");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let (ds, _) = load_csv(&a, &CsvSchema::with_label("class")).unwrap();
    assert_eq!(ds.len(), 200);
    let cfg = ExperimentConfig {
        dataset: DatasetSource::Csv(a.clone()),
        ..ExperimentConfig::default()
    };
    assert_eq!(load_dataset(&cfg).unwrap().len(), 200);

    let odd = dir.path().join("odd.csv");
    assert!(gen_dna(201, 42, CompositionWindow::Motif, &odd).is_err());
    assert!(!odd.exists());
}

#[test]
fn subsampling_respects_num_data_points() {
    let cfg = ExperimentConfig {
        num_data_points: Some(60),
        ..ExperimentConfig::default()
    };
    let ds = load_dataset(&cfg).unwrap();
    assert_eq!(ds.len(), 60);
    assert_eq!(ds, load_dataset(&cfg).unwrap());
    let dna = ExperimentConfig {
        dataset: DatasetSource::Dna,
        num_data_points: Some(51),
        ..ExperimentConfig::default()
    };
    assert!(dna.validate().is_err());
}

#[test]
fn breast_cancer_and_one_vs_rest_run() {
    let cfg = ExperimentConfig {
        max_iterations: 2,
        trials: 1,
        ..small(DatasetSource::BreastCancer)
    };
    let r = run_trials(&cfg).unwrap();
    assert_eq!(r.trials[0].final_report.confusion.len(), 2);

    let ovr = ExperimentConfig {
        multiclass_strategy: fedqnn::qnn::MulticlassStrategy::OneVsRest,
        max_iterations: 2,
        trials: 1,
        ..small(DatasetSource::Iris)
    };
    assert_eq!(run_trials(&ovr).unwrap().trials[0].final_report.confusion.len(), 3);
}
