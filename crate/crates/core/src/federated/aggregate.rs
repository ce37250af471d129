use serde::{Deserialize, Serialize};

use super::wire::ClientUpdate;
use crate::error::{Error, Result};
use crate::qnn::ParameterVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub params: ParameterVector,
    /// Number of completed aggregation rounds.
    pub round: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// `Θ = (1/K) Σ θ_k`.
    #[default]
    FedavgUnweighted,
    /// `Θ = Σ n_k θ_k / Σ n_k` with `n_k` the client's sample count.
    FedavgWeighted,
}

/// Averages client parameters into the next global model.
///
/// Updates are summed in ascending `client_id` order, so the result does not
/// depend on arrival order.
pub fn fedavg_aggregate(updates: &[ClientUpdate], mode: AggregationMode) -> Result<GlobalModel> {
    let first = updates
        .first()
        .ok_or_else(|| Error::Protocol("no client updates to aggregate".into()))?;
    let p = first.params.len();
    let mut ordered: Vec<&ClientUpdate> = updates.iter().collect();
    ordered.sort_by_key(|u| u.client_id);
    for pair in ordered.windows(2) {
        if pair[0].client_id == pair[1].client_id {
            return Err(Error::Protocol(format!(
                "duplicate update from client {}",
                pair[0].client_id
            )));
        }
    }
    for u in &ordered {
        if u.round != first.round {
            return Err(Error::Protocol(format!(
                "mixed rounds: client {} sent round {}, expected {}",
                u.client_id, u.round, first.round
            )));
        }
        if u.params.len() != p {
            return Err(Error::Protocol(format!(
                "client {} sent {} parameters, expected {p}",
                u.client_id,
                u.params.len()
            )));
        }
    }

    let weights: Vec<f64> = match mode {
        AggregationMode::FedavgUnweighted => vec![1.0; ordered.len()],
        AggregationMode::FedavgWeighted => {
            if let Some(u) = ordered.iter().find(|u| u.num_samples == 0) {
                return Err(Error::Protocol(format!(
                    "client {} reported zero samples",
                    u.client_id
                )));
            }
            ordered.iter().map(|u| u.num_samples as f64).collect()
        }
    };
    let total: f64 = weights.iter().sum();
    let mut sum = vec![0.0; p];
    for (u, w) in ordered.iter().zip(&weights) {
        for (acc, v) in sum.iter_mut().zip(u.params.as_slice()) {
            *acc += w * v;
        }
    }
    let params = sum.into_iter().map(|s| s / total).collect();
    Ok(GlobalModel {
        params: ParameterVector::new(params)?,
        round: first.round + 1,
    })
}
