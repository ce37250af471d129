//! Local client training: MSE loss, Adam, and the full-batch iteration loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::qnn::{Classifier, ParameterVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub mse: f64,
    pub num_samples: usize,
}

/// `(1/N) Σ (y_i − ŷ_i)²` over flattened predictions.
pub fn mse_loss(predictions: &[f64], labels: &[f64]) -> Result<LossReport> {
    if predictions.is_empty() {
        return Err(Error::Argument("mse of an empty prediction set".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let sum: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (y - p) * (y - p))
        .sum();
    Ok(LossReport {
        mse: sum / predictions.len() as f64,
        num_samples: predictions.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update. Inputs are not modified.
pub fn adam_step(
    state: &AdamState,
    params: &ParameterVector,
    gradient: &[f64],
) -> Result<(AdamState, ParameterVector)> {
    let p = params.len();
    if gradient.len() != p || state.first_moment.len() != p || state.second_moment.len() != p {
        return Err(Error::Argument(format!(
            "adam dimensions disagree: params {p}, gradient {}, moments {}/{}",
            gradient.len(),
            state.first_moment.len(),
            state.second_moment.len()
        )));
    }
    if let Some(i) = gradient.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("gradient component {i} is not finite")));
    }
    let AdamConfig {
        step_size,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step_count + 1;
    let bias1 = 1.0 - beta1.powi(t as i32);
    let bias2 = 1.0 - beta2.powi(t as i32);

    let mut next = AdamState {
        config: state.config,
        first_moment: Vec::with_capacity(p),
        second_moment: Vec::with_capacity(p),
        step_count: t,
    };
    let mut theta = Vec::with_capacity(p);
    for i in 0..p {
        let g = gradient[i];
        let m = beta1 * state.first_moment[i] + (1.0 - beta1) * g;
        let v = beta2 * state.second_moment[i] + (1.0 - beta2) * g * g;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        theta.push(params.as_slice()[i] - step_size * m_hat / (v_hat.sqrt() + epsilon));
        next.first_moment.push(m);
        next.second_moment.push(v);
    }
    Ok((next, ParameterVector::new(theta)?))
}

/// Mean loss and mean gradient over every sample of `data`.
pub fn batch_loss_and_grad(
    classifier: &Classifier,
    params: &ParameterVector,
    data: &Dataset,
) -> Result<(LossReport, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::Config(format!("dataset '{}' has no samples", data.name)));
    }
    let per_sample: Vec<(f64, Vec<f64>)> = data
        .features
        .par_iter()
        .zip(data.labels.par_iter())
        .map(|(x, &y)| {
            let fv = classifier.features(x)?;
            classifier.loss_and_grad(params, &fv, y)
        })
        .collect::<Result<_>>()?;
    // summed in sample order so the result is independent of thread scheduling
    let n = per_sample.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for (l, g) in &per_sample {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((
        LossReport {
            mse: loss / n,
            num_samples: per_sample.len(),
        },
        grad,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTraining {
    pub params: ParameterVector,
    pub adam: AdamState,
    /// Loss before each update, one entry per iteration.
    pub losses: Vec<LossReport>,
}

/// Runs `iterations` full-batch Adam steps on one client's shard.
pub fn train_local(
    data: &Dataset,
    classifier: &Classifier,
    params: &ParameterVector,
    adam: AdamState,
    iterations: usize,
) -> Result<LocalTraining> {
    if data.is_empty() {
        return Err(Error::Config(format!("client shard '{}' is empty", data.name)));
    }
    if iterations == 0 {
        return Err(Error::Config("local iterations must be at least 1".into()));
    }
    let mut params = params.clone();
    let mut adam = adam;
    let mut losses = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (loss, grad) = batch_loss_and_grad(classifier, &params, data)?;
        if !loss.mse.is_finite() {
            return Err(Error::Numeric("local loss became non-finite".into()));
        }
        losses.push(loss);
        (adam, params) = adam_step(&adam, &params, &grad)?;
    }
    Ok(LocalTraining {
        params,
        adam,
        losses,
    })
}

/// Test-set loss and predicted classes for a parameter vector.
pub fn evaluate(
    classifier: &Classifier,
    params: &ParameterVector,
    data: &Dataset,
) -> Result<(LossReport, Vec<usize>)> {
    if data.is_empty() {
        return Err(Error::Config(format!("dataset '{}' has no samples", data.name)));
    }
    let outputs: Vec<(Vec<f64>, Vec<f64>)> = data
        .features
        .par_iter()
        .zip(data.labels.par_iter())
        .map(|(x, &y)| {
            let fv = classifier.features(x)?;
            Ok((classifier.outputs(params, &fv)?, classifier.targets(y)))
        })
        .collect::<Result<_>>()?;
    let predictions = outputs.iter().map(|(o, _)| classifier.decide(o)).collect();
    let flat_out: Vec<f64> = outputs.iter().flat_map(|(o, _)| o.iter().copied()).collect();
    let flat_tgt: Vec<f64> = outputs.iter().flat_map(|(_, t)| t.iter().copied()).collect();
    let mut loss = mse_loss(&flat_out, &flat_tgt)?;
    loss.num_samples = data.len();
    Ok((loss, predictions))
}
