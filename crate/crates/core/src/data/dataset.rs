use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labelled feature matrix. Labels index into `class_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            feature_names,
            features,
            labels,
            class_names,
        };
        ds.check_shape()?;
        Ok(ds)
    }

    fn check_shape(&self) -> Result<()> {
        if self.features.len() != self.labels.len() {
            return Err(Error::Dataset(format!(
                "{} feature rows but {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        let m = self.feature_names.len();
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dataset(format!(
                    "row {i} has {} features, expected {m}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {i} column {j} is not finite")));
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.class_names.len()) {
            return Err(Error::Dataset(format!(
                "label {bad} outside {} classes",
                self.class_names.len()
            )));
        }
        Ok(())
    }

    /// Shape checks plus the ≥ 2 samples per class requirement of stratified splitting.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        if self.is_empty() {
            return Err(Error::Dataset(format!("dataset '{}' is empty", self.name)));
        }
        for (c, count) in self.class_counts().iter().enumerate() {
            if *count < 2 {
                return Err(Error::Dataset(format!(
                    "class '{}' has {count} samples; at least 2 are required",
                    self.class_names[c]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().map(move |row| row[j])
    }
}
