use std::collections::BTreeMap;
use std::thread;
use std::time::Duration;

use fedqnn::data::{iris, select_and_scale, Dataset};
use fedqnn::federated::transport::{RoundChannels, Transport};
use fedqnn::federated::wire::{decode_single_frame, read_frame};
use fedqnn::federated::{
    fedavg_aggregate, run_round, AggregationMode, ClientUpdate, Fault, FaultyTransport,
    FederatedClient, GlobalModel, InProcessTransport, LoopbackTransport, RecordingTransport,
    RoundPolicy, Server, StragglerPolicy,
};
use fedqnn::qnn::{Classifier, MulticlassStrategy, ParameterVector};
use fedqnn::training::{train_local, AdamConfig, AdamState};
use fedqnn::{Error, TransportError};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scaled_iris() -> Dataset {
    select_and_scale(&iris().unwrap().0, 4).unwrap()
}

/// Rows `start, start + step, …` of the scaled Iris set.
fn shard(ds: &Dataset, start: usize, step: usize, len: usize) -> Dataset {
    let idx: Vec<usize> = (0..len).map(|i| (start + i * step) % ds.len()).collect();
    ds.subset(&idx)
}

fn classifier() -> Classifier {
    Classifier::new(4, 4, 3, MulticlassStrategy::MultiReadout).unwrap()
}

fn init_params() -> ParameterVector {
    ParameterVector::new((0..16).map(|i| 0.4 * i as f64 % 6.0).collect()).unwrap()
}

fn setup(
    shards: Vec<Dataset>,
    policy: RoundPolicy,
) -> (Server, Vec<FederatedClient>) {
    let ds = scaled_iris();
    let test = shard(&ds, 1, 5, 30);
    let global = GlobalModel {
        params: init_params(),
        round: 0,
    };
    let mut server = Server::new(classifier(), test, global, policy).unwrap();
    let clients = shards
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            server.register(i as u32).unwrap();
            FederatedClient::new(i as u32, s, 1, AdamConfig::default()).unwrap()
        })
        .collect();
    (server, clients)
}

fn five_shards() -> Vec<Dataset> {
    let ds = scaled_iris();
    (0..5).map(|k| shard(&ds, k, 7, 6)).collect()
}

fn quick_policy(stragglers: StragglerPolicy) -> RoundPolicy {
    RoundPolicy {
        stragglers,
        timeout: Duration::from_millis(500),
        ..RoundPolicy::default()
    }
}

fn random_update(rng: &mut ChaCha8Rng, client_id: u32) -> ClientUpdate {
    ClientUpdate {
        round: 0,
        client_id,
        params: ParameterVector::new((0..16).map(|_| rng.random_range(-7.0..7.0)).collect())
            .unwrap(),
        num_samples: rng.random_range(1..100),
    }
}

proptest! {
    #[test]
    fn fedavg_is_permutation_invariant(seed in any::<u64>(), k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut updates: Vec<_> = (0..k as u32).map(|i| random_update(&mut rng, i)).collect();
        for mode in [AggregationMode::FedavgUnweighted, AggregationMode::FedavgWeighted] {
            let reference = fedavg_aggregate(&updates, mode).unwrap();
            for _ in 0..10 {
                updates.shuffle(&mut rng);
                prop_assert_eq!(&fedavg_aggregate(&updates, mode).unwrap(), &reference);
            }
        }
    }

    #[test]
    fn frames_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = rng.random_range(0..100);
        let update = random_update(&mut rng, id);
        let frame = update.to_frame().unwrap();
        let payload = decode_single_frame(&frame).unwrap();
        prop_assert_eq!(&payload, &update.encode_payload());
        prop_assert_eq!(ClientUpdate::decode_payload(&payload).unwrap(), update);
    }
}

#[test]
fn single_client_round_returns_its_parameters() {
    let ds = scaled_iris();
    let data = shard(&ds, 0, 3, 12);
    let (mut server, mut clients) = setup(vec![data.clone()], RoundPolicy::default());
    let outcome = run_round(&mut server, &mut clients, &mut InProcessTransport).unwrap();
    let local = train_local(
        &data,
        &classifier(),
        &init_params(),
        AdamState::new(AdamConfig::default(), 16),
        1,
    )
    .unwrap();
    assert_eq!(outcome.model.params, local.params);
    assert_eq!(outcome.model.round, 1);
    assert_eq!(server.global(), &outcome.model);
    assert_eq!(outcome.metrics.accepted, 1);
    assert_eq!(outcome.client_losses.len(), 1);
}

#[test]
fn identical_shards_give_identical_parameters() {
    let ds = scaled_iris();
    let data = shard(&ds, 2, 4, 10);
    let (mut server, mut clients) = setup(vec![data.clone(), data], RoundPolicy::default());
    let outcome = run_round(&mut server, &mut clients, &mut InProcessTransport).unwrap();
    let local = train_local(
        &shard(&ds, 2, 4, 10),
        &classifier(),
        &init_params(),
        AdamState::new(AdamConfig::default(), 16),
        1,
    )
    .unwrap();
    for (a, b) in outcome.model.params.as_slice().iter().zip(local.params.as_slice()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn rounds_advance_and_persisted_adam_differs() {
    let run = |persist: bool| {
        let (mut server, clients) = setup(five_shards(), RoundPolicy::default());
        let mut clients: Vec<_> = clients.into_iter().map(|c| c.persist_adam(persist)).collect();
        for r in 1..=3 {
            let outcome = run_round(&mut server, &mut clients, &mut InProcessTransport).unwrap();
            assert_eq!(outcome.metrics.round, r);
        }
        server.global().params.clone()
    };
    assert_ne!(run(false), run(true));
}

#[test]
fn strict_round_rejects_corrupt_frame_and_keeps_model() {
    let (mut server, mut clients) = setup(five_shards(), quick_policy(StragglerPolicy::Strict));
    let before = server.global().clone();
    let mut transport =
        FaultyTransport::new(InProcessTransport, BTreeMap::from([(2, Fault::CorruptChecksum)]));
    let err = run_round(&mut server, &mut clients, &mut transport).unwrap_err();
    assert!(matches!(
        err,
        Error::Transport(TransportError::ChecksumMismatch { .. })
    ));
    assert_eq!(server.global(), &before);
}

#[test]
fn tolerant_round_aggregates_the_rest() {
    let (mut server, mut clients) =
        setup(five_shards(), quick_policy(StragglerPolicy::TolerateStragglers));
    let faults = BTreeMap::from([
        (0, Fault::CorruptPayload { byte: 9 }),
        (3, Fault::Drop),
    ]);
    let mut transport = FaultyTransport::new(InProcessTransport, faults);
    let outcome = run_round(&mut server, &mut clients, &mut transport).unwrap();
    assert_eq!(outcome.metrics.accepted, 3);
    assert_eq!(outcome.metrics.rejected.len(), 2);

    // the result equals averaging the three good clients directly
    let ds = scaled_iris();
    let updates: Vec<ClientUpdate> = [1usize, 2, 4]
        .iter()
        .map(|&k| ClientUpdate {
            round: 0,
            client_id: k as u32,
            params: train_local(
                &shard(&ds, k, 7, 6),
                &classifier(),
                &init_params(),
                AdamState::new(AdamConfig::default(), 16),
                1,
            )
            .unwrap()
            .params,
            num_samples: 6,
        })
        .collect();
    let expected = fedavg_aggregate(&updates, AggregationMode::FedavgUnweighted).unwrap();
    assert_eq!(outcome.model, expected);
}

#[test]
fn tolerant_round_below_quorum_fails() {
    let (mut server, mut clients) =
        setup(five_shards(), quick_policy(StragglerPolicy::TolerateStragglers));
    let faults = BTreeMap::from([(0, Fault::Drop), (1, Fault::Drop), (2, Fault::CorruptChecksum)]);
    let mut transport = FaultyTransport::new(InProcessTransport, faults);
    let before = server.global().clone();
    assert!(matches!(
        run_round(&mut server, &mut clients, &mut transport),
        Err(Error::Protocol(_))
    ));
    assert_eq!(server.global(), &before);
}

#[test]
fn unregistered_or_duplicate_clients_rejected() {
    let (mut server, mut clients) = setup(five_shards(), RoundPolicy::default());
    assert!(server.register(0).is_err());
    let extra = FederatedClient::new(99, scaled_iris(), 1, AdamConfig::default()).unwrap();
    clients.push(extra);
    assert!(matches!(
        run_round(&mut server, &mut clients, &mut InProcessTransport),
        Err(Error::Protocol(_))
    ));
    assert!(FederatedClient::new(0, scaled_iris().subset(&[]), 1, AdamConfig::default()).is_err());
}

#[test]
fn loopback_round_is_bit_identical_to_in_process() {
    let (mut a, mut ca) = setup(five_shards(), RoundPolicy::default());
    let (mut b, mut cb) = setup(five_shards(), RoundPolicy::default());
    for _ in 0..2 {
        let x = run_round(&mut a, &mut ca, &mut InProcessTransport).unwrap();
        let y = run_round(&mut b, &mut cb, &mut LoopbackTransport).unwrap();
        assert_eq!(x.model, y.model);
        assert_eq!(x.metrics, y.metrics);
    }
}

#[test]
fn only_parameters_cross_the_wire() {
    let shards = five_shards();
    let (mut server, mut clients) = setup(shards.clone(), RoundPolicy::default());
    let mut transport = RecordingTransport::new(InProcessTransport);
    run_round(&mut server, &mut clients, &mut transport).unwrap();
    let frames = transport.frames();
    assert_eq!(frames.len(), 5);
    for frame in &frames {
        // exactly header + (round, id, P) + 16 params + num_samples + CRC
        assert_eq!(frame.len(), 4 + 12 + 16 * 8 + 4 + 4);
        let update = ClientUpdate::decode_payload(&decode_single_frame(frame).unwrap()).unwrap();
        let own = &shards[update.client_id as usize];
        assert_eq!(update.num_samples as usize, own.len());
        // no raw feature value appears as an 8-byte pattern in the frame;
        // zeros are skipped since they match the zeroed header words
        for shard in &shards {
            for row in &shard.features {
                for v in row.iter().filter(|v| **v != 0.0) {
                    let bytes = v.to_le_bytes();
                    assert!(!frame.windows(8).any(|w| w == bytes), "feature {v} leaked");
                }
            }
        }
    }
}

fn stress(transport: &mut dyn Transport, reps: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for rep in 0..reps {
        let updates: Vec<_> = (0..5u32).map(|i| random_update(&mut rng, i)).collect();
        let RoundChannels { uplinks, mut inbox } = transport.open_round(5).unwrap();
        thread::scope(|s| {
            for (mut up, u) in uplinks.into_iter().zip(&updates) {
                s.spawn(move || up.send(u.to_frame().unwrap()).unwrap());
            }
        });
        let mut got: Vec<ClientUpdate> = (0..5)
            .map(|_| ClientUpdate::decode_payload(&inbox.recv(Duration::from_secs(10)).unwrap()).unwrap())
            .collect();
        got.sort_by_key(|u| u.client_id);
        assert_eq!(got, updates, "repetition {rep}");
        assert!(matches!(
            inbox.recv(Duration::from_millis(1)),
            Err(TransportError::Timeout { .. }) | Err(TransportError::Closed)
        ));
    }
}

#[test]
fn five_concurrent_senders_in_process() {
    stress(&mut InProcessTransport, 1000);
}

#[test]
fn five_concurrent_senders_loopback() {
    stress(&mut LoopbackTransport, 1000);
}

#[test]
fn randomized_fault_injection_never_aggregates_partially() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        let updates: Vec<_> = (0..5u32).map(|i| random_update(&mut rng, i)).collect();
        let victim = rng.random_range(0..5usize);
        let frame_len = updates[victim].to_frame().unwrap().len();
        let fault = match rng.random_range(0..3) {
            0 => Fault::CorruptChecksum,
            1 => Fault::CorruptPayload { byte: rng.random_range(0..frame_len) },
            _ => Fault::Truncate { keep: rng.random_range(0..frame_len) },
        };
        let mut transport = FaultyTransport::new(InProcessTransport, BTreeMap::from([(victim, fault)]));
        let RoundChannels { uplinks, mut inbox } = transport.open_round(5).unwrap();
        for (mut up, u) in uplinks.into_iter().zip(&updates) {
            up.send(u.to_frame().unwrap()).unwrap();
        }
        let mut accepted = Vec::new();
        let mut rejected = 0;
        for _ in 0..5 {
            match inbox.recv(Duration::from_secs(1)) {
                Ok(p) => accepted.push(ClientUpdate::decode_payload(&p).unwrap()),
                Err(
                    TransportError::ChecksumMismatch { .. }
                    | TransportError::Truncated { .. }
                    | TransportError::Malformed(_),
                ) => rejected += 1,
                Err(e) => panic!("trial {trial}: unexpected {e}"),
            }
        }
        assert_eq!(rejected, 1, "trial {trial}: {fault:?}");
        assert!(accepted.iter().all(|u| u.client_id as usize != victim));
        // a strict server refuses to aggregate anything short of all five
        assert!(accepted.len() < 5);
    }
}

#[test]
fn stream_reader_rejects_truncation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let frame = random_update(&mut rng, 3).to_frame().unwrap();
    for cut in 1..frame.len() {
        let mut r = &frame[..cut];
        assert!(read_frame(&mut r).is_err());
    }
}
