use std::collections::BTreeSet;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::aggregate::{fedavg_aggregate, AggregationMode, GlobalModel};
use super::transport::{recv_until, RoundChannels, Transport};
use super::wire::ClientUpdate;
use crate::data::Dataset;
use crate::error::{Error, Result, TransportError};
use crate::qnn::Classifier;
use crate::training::{evaluate, train_local, AdamConfig, AdamState, LossReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StragglerPolicy {
    /// Every registered client must deliver a valid update.
    #[default]
    Strict,
    /// Aggregate once at least ⌈K/2⌉ valid updates arrived; log the rest.
    TolerateStragglers,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundPolicy {
    pub aggregation: AggregationMode,
    pub stragglers: StragglerPolicy,
    pub timeout: Duration,
}

impl Default for RoundPolicy {
    fn default() -> Self {
        Self {
            aggregation: AggregationMode::default(),
            stragglers: StragglerPolicy::default(),
            timeout: Duration::from_secs(60),
        }
    }
}

/// A client device: its private shard and optimizer settings.
#[derive(Debug, Clone)]
pub struct FederatedClient {
    id: u32,
    shard: Dataset,
    local_iterations: usize,
    adam_config: AdamConfig,
    persist_adam: bool,
    adam: Option<AdamState>,
}

impl FederatedClient {
    pub fn new(id: u32, shard: Dataset, local_iterations: usize, adam_config: AdamConfig) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::Config(format!("client {id} has an empty shard")));
        }
        if local_iterations == 0 {
            return Err(Error::Config("local_iterations must be at least 1".into()));
        }
        Ok(Self {
            id,
            shard,
            local_iterations,
            adam_config,
            persist_adam: false,
            adam: None,
        })
    }

    /// Keep Adam moments between rounds instead of starting fresh each round.
    pub fn persist_adam(mut self, persist: bool) -> Self {
        self.persist_adam = persist;
        self
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn num_samples(&self) -> usize {
        self.shard.len()
    }

    fn train(
        &mut self,
        classifier: &Classifier,
        global: &GlobalModel,
    ) -> Result<(ClientUpdate, Vec<LossReport>)> {
        let adam = match (self.persist_adam, self.adam.take()) {
            (true, Some(state)) => state,
            _ => AdamState::new(self.adam_config, global.params.len()),
        };
        let outcome = train_local(
            &self.shard,
            classifier,
            &global.params,
            adam,
            self.local_iterations,
        )?;
        if self.persist_adam {
            self.adam = Some(outcome.adam);
        }
        let update = ClientUpdate {
            round: global.round,
            client_id: self.id,
            params: outcome.params,
            num_samples: self.shard.len() as u32,
        };
        Ok((update, outcome.losses))
    }
}

/// Per-iteration local loss of one client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientLossRecord {
    pub round: u32,
    pub client_id: u32,
    pub iteration: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// Index of the completed round, starting at 1.
    pub round: u32,
    pub accuracy: f64,
    pub loss: f64,
    pub accepted: usize,
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub model: GlobalModel,
    pub metrics: RoundMetrics,
    pub predictions: Vec<usize>,
    pub client_losses: Vec<ClientLossRecord>,
}

/// The aggregating coordinator. It holds the global model and the held-out
/// test set; client shards never reach it.
#[derive(Debug, Clone)]
pub struct Server {
    classifier: Classifier,
    test_set: Dataset,
    global: GlobalModel,
    policy: RoundPolicy,
    registry: BTreeSet<u32>,
}

impl Server {
    pub fn new(classifier: Classifier, test_set: Dataset, global: GlobalModel, policy: RoundPolicy) -> Result<Self> {
        if global.params.len() != classifier.num_params() {
            return Err(Error::Config(format!(
                "global model has {} parameters, classifier needs {}",
                global.params.len(),
                classifier.num_params()
            )));
        }
        if test_set.is_empty() {
            return Err(Error::Config("the server needs a nonempty test set".into()));
        }
        Ok(Self {
            classifier,
            test_set,
            global,
            policy,
            registry: BTreeSet::new(),
        })
    }

    pub fn register(&mut self, client_id: u32) -> Result<()> {
        if !self.registry.insert(client_id) {
            return Err(Error::Protocol(format!("client {client_id} registered twice")));
        }
        Ok(())
    }

    pub fn global(&self) -> &GlobalModel {
        &self.global
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    pub fn policy(&self) -> &RoundPolicy {
        &self.policy
    }

    fn validate(&self, update: &ClientUpdate, seen: &BTreeSet<u32>) -> Result<()> {
        if update.round != self.global.round {
            return Err(Error::Protocol(format!(
                "client {} sent round {}, server is on round {}",
                update.client_id, update.round, self.global.round
            )));
        }
        if !self.registry.contains(&update.client_id) {
            return Err(Error::Protocol(format!(
                "update from unregistered client {}",
                update.client_id
            )));
        }
        if seen.contains(&update.client_id) {
            return Err(Error::Protocol(format!(
                "duplicate update from client {}",
                update.client_id
            )));
        }
        if update.params.len() != self.global.params.len() {
            return Err(Error::Protocol(format!(
                "client {} sent {} parameters, expected {}",
                update.client_id,
                update.params.len(),
                self.global.params.len()
            )));
        }
        Ok(())
    }
}

/// One federated round: broadcast, concurrent local training, collection over
/// `transport`, aggregation, and evaluation of the new global model.
///
/// On failure the server's global model is left unchanged.
pub fn run_round(
    server: &mut Server,
    clients: &mut [FederatedClient],
    transport: &mut dyn Transport,
) -> Result<RoundOutcome> {
    let k = clients.len();
    if k == 0 {
        return Err(Error::Config("a round needs at least one client".into()));
    }
    let mut ids = BTreeSet::new();
    for c in clients.iter() {
        if !server.registry.contains(&c.id) {
            return Err(Error::Protocol(format!("client {} is not registered", c.id)));
        }
        if !ids.insert(c.id) {
            return Err(Error::Protocol(format!("client {} appears twice", c.id)));
        }
    }

    let order: Vec<u32> = clients.iter().map(|c| c.id).collect();
    let RoundChannels { uplinks, mut inbox } = transport.open_round(k)?;
    let broadcast = server.global.clone();
    let classifier = &server.classifier;
    let strict = server.policy.stragglers == StragglerPolicy::Strict;

    let trained: Vec<(u32, Result<Vec<LossReport>>)> = thread::scope(|scope| {
        let handles: Vec<_> = clients
            .iter_mut()
            .zip(uplinks)
            .map(|(client, mut uplink)| {
                let broadcast = &broadcast;
                scope.spawn(move || {
                    let (update, losses) = client.train(classifier, broadcast)?;
                    uplink.send(update.to_frame()?)?;
                    Ok(losses)
                })
            })
            .collect();
        order
            .iter()
            .zip(handles)
            .map(|(&id, h)| {
                let result = h
                    .join()
                    .unwrap_or_else(|_| Err(Error::Numeric("client thread panicked".into())));
                (id, result)
            })
            .collect()
    });

    let mut rejected = Vec::new();
    let mut client_losses = Vec::new();
    let mut failed = 0;
    for (id, result) in trained {
        match result {
            Ok(losses) => client_losses.extend(losses.iter().enumerate().map(|(i, l)| ClientLossRecord {
                round: broadcast.round,
                client_id: id,
                iteration: i,
                mse: l.mse,
            })),
            Err(e) if strict => return Err(e),
            Err(e) => {
                failed += 1;
                rejected.push(format!("client {id}: {e}"));
            }
        }
    }

    let deadline = Instant::now() + server.policy.timeout;
    let mut updates = Vec::with_capacity(k);
    let mut seen = BTreeSet::new();
    let mut received = 0;
    while received + failed < k {
        let payload = match recv_until(inbox.as_mut(), deadline) {
            Ok(p) => p,
            Err(TransportError::Timeout { .. }) | Err(TransportError::Closed) => {
                if strict {
                    return Err(TransportError::Timeout {
                        received: updates.len(),
                        expected: k,
                    }
                    .into());
                }
                rejected.push(format!("{} update(s) missing at deadline", k - received - failed));
                break;
            }
            Err(e) => {
                received += 1;
                if strict {
                    return Err(e.into());
                }
                rejected.push(e.to_string());
                continue;
            }
        };
        received += 1;
        let checked = ClientUpdate::decode_payload(&payload)
            .map_err(Error::from)
            .and_then(|u| server.validate(&u, &seen).map(|_| u));
        match checked {
            Ok(update) => {
                seen.insert(update.client_id);
                updates.push(update);
            }
            Err(e) if strict => return Err(e),
            Err(e) => rejected.push(e.to_string()),
        }
    }

    let quorum = if strict { k } else { k.div_ceil(2) };
    if updates.len() < quorum {
        return Err(Error::Protocol(format!(
            "only {} of {k} valid updates (need {quorum})",
            updates.len()
        )));
    }
    if !rejected.is_empty() {
        log::warn!(
            "round {}: aggregating {} of {k} updates; rejected: {}",
            broadcast.round,
            updates.len(),
            rejected.join("; ")
        );
    }

    let model = fedavg_aggregate(&updates, server.policy.aggregation)?;
    let (loss, predictions) = evaluate(&server.classifier, &model.params, &server.test_set)?;
    let correct = predictions
        .iter()
        .zip(&server.test_set.labels)
        .filter(|(p, y)| p == y)
        .count();
    let metrics = RoundMetrics {
        round: model.round,
        accuracy: correct as f64 / predictions.len() as f64,
        loss: loss.mse,
        accepted: updates.len(),
        rejected,
    };
    server.global = model.clone();
    Ok(RoundOutcome {
        model,
        metrics,
        predictions,
        client_losses,
    })
}
