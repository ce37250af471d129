//! Classification reports and per-round accuracy trajectories.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Macro-averaged scores plus the confusion matrix (`confusion[true][predicted]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassificationReport {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let c = confusion.len();
        if c == 0 || confusion.iter().any(|row| row.len() != c) {
            return Err(Error::Argument("confusion matrix must be square and nonempty".into()));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Argument("confusion matrix is empty".into()));
        }
        let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
        let per_class: Vec<ClassMetrics> = (0..c)
            .map(|k| {
                let tp = confusion[k][k];
                let predicted: usize = confusion.iter().map(|row| row[k]).sum();
                let actual: usize = confusion[k].iter().sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, actual);
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support: actual,
                }
            })
            .collect();
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
        Ok(Self {
            accuracy: ratio(correct, total),
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
            per_class,
            confusion,
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Vec<usize>>> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::Argument(format!(
            "need equal nonempty vectors, got {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut confusion = vec![vec![0; num_classes]; num_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= num_classes || y >= num_classes {
            return Err(Error::Argument(format!(
                "class index {} outside {num_classes} classes",
                p.max(y)
            )));
        }
        confusion[y][p] += 1;
    }
    Ok(confusion)
}

pub fn classification_report(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<ClassificationReport> {
    ClassificationReport::from_confusion(confusion_matrix(predictions, labels, num_classes)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub accuracy: f64,
    pub loss: f64,
}

/// Evaluation history of one trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub trial: usize,
    pub records: Vec<RoundRecord>,
}

impl TrajectoryLog {
    pub fn new(trial: usize) -> Self {
        Self {
            trial,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: RoundRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.round <= last.round {
                return Err(Error::Argument(format!(
                    "round {} does not follow round {}",
                    record.round, last.round
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn rounds(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.round).collect()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.accuracy).collect()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.last().map(|r| r.accuracy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCurve {
    pub rounds: Vec<usize>,
    pub mean_accuracy: Vec<f64>,
    /// Sample standard deviation across trials; zero for a single trial.
    pub std_accuracy: Vec<f64>,
    pub mean_loss: Vec<f64>,
    pub trials: usize,
}

impl MeanCurve {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.mean_accuracy.last().copied()
    }
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-round mean and sample standard deviation across trials.
pub fn aggregate_trials(logs: &[TrajectoryLog]) -> Result<MeanCurve> {
    let first = logs
        .first()
        .ok_or_else(|| Error::Argument("no trajectories to aggregate".into()))?;
    let rounds = first.rounds();
    if let Some(bad) = logs.iter().find(|l| l.rounds() != rounds) {
        return Err(Error::Argument(format!(
            "trial {} covers different rounds than trial {}",
            bad.trial, first.trial
        )));
    }
    let mut mean_accuracy = Vec::with_capacity(rounds.len());
    let mut std_accuracy = Vec::with_capacity(rounds.len());
    let mut mean_loss = Vec::with_capacity(rounds.len());
    for r in 0..rounds.len() {
        let acc: Vec<f64> = logs.iter().map(|l| l.records[r].accuracy).collect();
        let loss: Vec<f64> = logs.iter().map(|l| l.records[r].loss).collect();
        let (m, s) = mean_and_std(&acc);
        mean_accuracy.push(m);
        std_accuracy.push(s);
        mean_loss.push(mean_and_std(&loss).0);
    }
    Ok(MeanCurve {
        rounds,
        mean_accuracy,
        std_accuracy,
        mean_loss,
        trials: logs.len(),
    })
}

/// Sample standard deviation of consecutive differences; a roughness score for a curve.
pub fn first_difference_std(series: &[f64]) -> f64 {
    let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.is_empty() {
        return 0.0;
    }
    mean_and_std(&diffs).1
}

/// `round,trial,accuracy,loss` rows, trials in the given order.
pub fn trajectory_csv(logs: &[TrajectoryLog]) -> String {
    let mut out = String::from("round,trial,accuracy,loss\n");
    for log in logs {
        for r in &log.records {
            let _ = writeln!(out, "{},{},{},{}", r.round, log.trial, r.accuracy, r.loss);
        }
    }
    out
}

pub fn mean_curve_csv(curve: &MeanCurve) -> String {
    let mut out = String::from("round,mean_accuracy,std_accuracy,mean_loss\n");
    for i in 0..curve.rounds.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            curve.rounds[i], curve.mean_accuracy[i], curve.std_accuracy[i], curve.mean_loss[i]
        );
    }
    out
}
