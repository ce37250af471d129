//! Federated orchestration: wire format, transports, parameter averaging,
//! round execution, and density-matrix averaging.

mod aggregate;
pub mod density;
mod round;
pub mod transport;
pub mod wire;

pub use aggregate::{fedavg_aggregate, AggregationMode, GlobalModel};
pub use density::{riemannian_average, schatten_average, DensityMatrix, StateMetric};
pub use round::{
    run_round, ClientLossRecord, FederatedClient, RoundMetrics, RoundOutcome, RoundPolicy, Server,
    StragglerPolicy,
};
pub use transport::{
    Fault, FaultyTransport, InProcessTransport, LoopbackTransport, RecordingTransport, Transport,
};
pub use wire::ClientUpdate;
