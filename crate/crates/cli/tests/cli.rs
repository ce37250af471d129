use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fedqnn(args: &[&str], runs_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedqnn"))
        .args(args)
        .env("FEDQNN_RUNS_DIR", runs_dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn gen_dna_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = fedqnn(
            &["gen-dna", "--num_samples", "200", "--seed", "42", "--out", path.to_str().unwrap()],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 201);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn gen_dna_rejects_odd_counts_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("odd.csv");
    let out = fedqnn(
        &["gen-dna", "--num_samples", "199", "--out", path.to_str().unwrap()],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("even"));
    assert!(!path.exists());
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedqnn(
        &["run", "--max_iterations", "0", "--num_features_to_use", "9", "--trials", "0"],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = stderr(&out);
    for needle in ["max_iterations", "num_features_to_use", "trials"] {
        assert!(err.contains(needle), "missing {needle} in: {err}");
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, "dataset = \"iris\"\nrounds = 2\ntrials = 1\nseed = 5\n").unwrap();
    let runs = dir.path().join("runs");
    let out = fedqnn(
        &["run", "--config", config.to_str().unwrap(), "--num_clients", "2"],
        &runs,
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let run_dirs: Vec<_> = fs::read_dir(&runs).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(run_dirs.len(), 1);
    let run_dir = &run_dirs[0];
    assert!(run_dir.file_name().unwrap().to_str().unwrap().ends_with("-seed5"));
    for file in ["config.toml", "trajectory.csv", "mean_curve.csv", "report.json"] {
        assert!(run_dir.join(file).is_file(), "{file} missing");
    }
    let resolved = fs::read_to_string(run_dir.join("config.toml")).unwrap();
    assert!(resolved.contains("num_clients = 2"));
    assert!(resolved.contains("max_iterations = 2"));
    assert!(resolved.contains("learning_rate = 0.1"));

    let report = fedqnn(&["report", run_dir.to_str().unwrap()], dir.path());
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).contains("dataset:    iris"));

    // re-running from the resolved config lands in the same directory with the same trajectory
    let before = fs::read(run_dir.join("trajectory.csv")).unwrap();
    let again = fedqnn(
        &["run", "--config", run_dir.join("config.toml").to_str().unwrap()],
        &runs,
    );
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(fs::read_dir(&runs).unwrap().count(), 1);
    assert_eq!(fs::read(run_dir.join("trajectory.csv")).unwrap(), before);
}

#[test]
fn sweep_clients_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("sweep.csv");
    let out = fedqnn(
        &[
            "sweep-clients",
            "--clients",
            "1,2",
            "--rounds",
            "2",
            "--trials",
            "1",
            "--out",
            table.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "num_clients,mean_final_accuracy");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,") && lines[2].starts_with("2,"));

    let dup = fedqnn(&["sweep-clients", "--clients", "2,2", "--rounds", "1"], dir.path());
    assert!(!dup.status.success());
    assert!(stderr(&dup).contains("twice"));
}

#[test]
fn unknown_choices_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        ["run", "--dataset", "mnist"],
        ["run", "--aggregation", "median"],
    ] {
        let out = fedqnn(&args, dir.path());
        assert!(!out.status.success());
    }
}
