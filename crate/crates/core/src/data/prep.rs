use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Variance-ranked column selection plus min–max scaling into `[0, π]`,
/// fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    /// Selected source columns, ascending.
    pub columns: Vec<usize>,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

impl FeatureScaler {
    pub fn fit(train: &Dataset, num_features: usize) -> Result<Self> {
        let m = train.num_features();
        if num_features == 0 || num_features > m {
            return Err(Error::Config(format!(
                "num_features_to_use must be in 1..={m}, got {num_features}"
            )));
        }
        if train.is_empty() {
            return Err(Error::Dataset("cannot fit a scaler on zero rows".into()));
        }
        let columns: Vec<Vec<f64>> = (0..m).map(|j| train.column(j).collect()).collect();
        let mut ranked: Vec<(usize, f64)> =
            columns.iter().enumerate().map(|(j, c)| (j, variance(c))).collect();
        // stable: equal variances keep the lower column first
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut selected: Vec<usize> = ranked[..num_features].iter().map(|(j, _)| *j).collect();
        selected.sort_unstable();

        let mut mins = Vec::with_capacity(num_features);
        let mut maxs = Vec::with_capacity(num_features);
        for &j in &selected {
            let lo = columns[j].iter().copied().fold(f64::INFINITY, f64::min);
            let hi = columns[j].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                log::warn!(
                    "feature '{}' is constant on the training set; mapping it to π/2",
                    train.feature_names[j]
                );
            }
            mins.push(lo);
            maxs.push(hi);
        }
        Ok(Self {
            columns: selected,
            mins,
            maxs,
        })
    }

    pub fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let (lo, hi) = (self.mins[k], self.maxs[k]);
                if lo == hi {
                    FRAC_PI_2
                } else {
                    (PI * (row[j] - lo) / (hi - lo)).clamp(0.0, PI)
                }
            })
            .collect()
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        Dataset {
            name: ds.name.clone(),
            feature_names: self.columns.iter().map(|&j| ds.feature_names[j].clone()).collect(),
            features: ds.features.iter().map(|r| self.scale_row(r)).collect(),
            labels: ds.labels.clone(),
            class_names: ds.class_names.clone(),
        }
    }
}

/// Keeps the `num_features_to_use` highest-variance columns, scaled into `[0, π]`.
pub fn select_and_scale(ds: &Dataset, num_features_to_use: usize) -> Result<Dataset> {
    Ok(FeatureScaler::fit(ds, num_features_to_use)?.transform(ds))
}

/// Row indices of a stratified train/test split with IID client shards.
/// Every index refers to the source dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub client_shards: Vec<Vec<usize>>,
}

impl DatasetSplit {
    pub fn num_clients(&self) -> usize {
        self.client_shards.len()
    }
}

/// Per-class test counts by largest remainder, keeping one training row per class.
fn test_quota(counts: &[usize], total_test: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let exact: Vec<f64> = counts
        .iter()
        .map(|&c| total_test as f64 * c as f64 / n as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra)
    });
    let mut remaining = total_test - quota.iter().sum::<usize>();
    for &c in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if quota[c] + 1 < counts[c] {
            quota[c] += 1;
            remaining -= 1;
        }
    }
    for (q, &c) in quota.iter_mut().zip(counts) {
        *q = (*q).min(c.saturating_sub(1));
    }
    quota
}

pub fn split_and_partition(
    ds: &Dataset,
    test_fraction: f64,
    num_clients: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    if num_clients == 0 {
        return Err(Error::Config("num_clients must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config(format!(
            "test_fraction must be in [0, 1), got {test_fraction}"
        )));
    }
    ds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_test = (test_fraction * ds.len() as f64).round() as usize;
    let quota = test_quota(&ds.class_counts(), total_test);

    let mut test = Vec::with_capacity(total_test);
    let mut train = Vec::with_capacity(ds.len() - total_test);
    for (class, &q) in quota.iter().enumerate() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..q]);
        train.extend_from_slice(&members[q..]);
    }
    test.sort_unstable();
    train.sort_unstable();

    if train.len() < num_clients {
        return Err(Error::Config(format!(
            "{} training rows cannot fill {num_clients} client shards",
            train.len()
        )));
    }
    let mut dealt = train.clone();
    dealt.shuffle(&mut rng);
    let mut client_shards = vec![Vec::new(); num_clients];
    for (i, idx) in dealt.into_iter().enumerate() {
        client_shards[i % num_clients].push(idx);
    }
    Ok(DatasetSplit {
        train,
        test,
        client_shards,
    })
}
