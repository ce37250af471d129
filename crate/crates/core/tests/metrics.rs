use fedqnn::metrics::{
    aggregate_trials, classification_report, confusion_matrix, first_difference_std,
    trajectory_csv, ClassificationReport, RoundRecord, TrajectoryLog,
};
use proptest::prelude::*;

/// Per-class counts computed directly from the label vectors.
fn reference_macro(preds: &[usize], labels: &[usize], c: usize) -> (f64, f64, f64, f64) {
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    let mut f_sum = 0.0;
    for k in 0..c {
        let tp = preds.iter().zip(labels).filter(|(p, y)| **p == k && **y == k).count() as f64;
        let fp = preds.iter().zip(labels).filter(|(p, y)| **p == k && **y != k).count() as f64;
        let fn_ = preds.iter().zip(labels).filter(|(p, y)| **p != k && **y == k).count() as f64;
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        p_sum += p;
        r_sum += r;
        f_sum += f;
    }
    let acc = preds.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / preds.len() as f64;
    (acc, p_sum / c as f64, r_sum / c as f64, f_sum / c as f64)
}

fn pairs() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
    (2usize..5).prop_flat_map(|c| {
        (1usize..80).prop_flat_map(move |n| {
            (
                Just(c),
                prop::collection::vec(0..c, n),
                prop::collection::vec(0..c, n),
            )
        })
    })
}

proptest! {
    #[test]
    fn report_matches_reference((c, preds, labels) in pairs()) {
        let r = classification_report(&preds, &labels, c).unwrap();
        let (acc, p, rec, f) = reference_macro(&preds, &labels, c);
        prop_assert!((r.accuracy - acc).abs() < 1e-12);
        prop_assert!((r.precision - p).abs() < 1e-12);
        prop_assert!((r.recall - rec).abs() < 1e-12);
        prop_assert!((r.f1 - f).abs() < 1e-12);
        prop_assert_eq!(r.total(), preds.len());
    }

    #[test]
    fn confusion_and_raw_paths_agree((c, preds, labels) in pairs()) {
        let from_raw = classification_report(&preds, &labels, c).unwrap();
        let from_confusion =
            ClassificationReport::from_confusion(confusion_matrix(&preds, &labels, c).unwrap()).unwrap();
        prop_assert_eq!(from_raw, from_confusion);
    }
}

#[test]
fn binary_example() {
    // tp=2 fp=1 fn=1 tn=2 for class 1
    let preds = [1, 1, 1, 0, 0, 0];
    let labels = [1, 1, 0, 1, 0, 0];
    let r = classification_report(&preds, &labels, 2).unwrap();
    assert!((r.accuracy - 4.0 / 6.0).abs() < 1e-15);
    assert!((r.per_class[1].precision - 2.0 / 3.0).abs() < 1e-15);
    assert!((r.per_class[1].recall - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.confusion, vec![vec![2, 1], vec![1, 2]]);
}

#[test]
fn invalid_inputs_rejected() {
    assert!(classification_report(&[0, 1], &[0], 2).is_err());
    assert!(classification_report(&[], &[], 2).is_err());
    assert!(classification_report(&[3], &[0], 2).is_err());
}

fn log(trial: usize, acc: &[f64]) -> TrajectoryLog {
    let mut l = TrajectoryLog::new(trial);
    for (i, a) in acc.iter().enumerate() {
        l.push(RoundRecord { round: i + 1, accuracy: *a, loss: 1.0 - a }).unwrap();
    }
    l
}

#[test]
fn mean_curve_and_smoothness() {
    let a = log(0, &[0.5, 0.9, 0.5, 0.9]);
    let b = log(1, &[0.9, 0.5, 0.9, 0.5]);
    let curve = aggregate_trials(&[a.clone(), b.clone()]).unwrap();
    assert_eq!(curve.mean_accuracy, vec![0.7; 4]);
    assert!((curve.std_accuracy[0] - (0.08f64).sqrt()).abs() < 1e-12);
    assert_eq!(first_difference_std(&curve.mean_accuracy), 0.0);
    assert!(first_difference_std(&a.accuracies()) > 0.4);

    let mut short = TrajectoryLog::new(2);
    short.push(RoundRecord { round: 1, accuracy: 0.1, loss: 0.0 }).unwrap();
    assert!(aggregate_trials(&[a, short]).is_err());
    assert!(aggregate_trials(&[]).is_err());
}

#[test]
fn rounds_must_increase() {
    let mut l = log(0, &[0.1, 0.2]);
    assert!(l.push(RoundRecord { round: 2, accuracy: 0.0, loss: 0.0 }).is_err());
}

#[test]
fn trajectory_csv_layout() {
    let csv = trajectory_csv(&[log(0, &[0.5, 0.75]), log(1, &[0.25])]);
    assert_eq!(csv, "round,trial,accuracy,loss\n1,0,0.5,0.5\n2,0,0.75,0.25\n1,1,0.25,0.75\n");
}
