//! Federated training of a small variational quantum classifier.
//!
//! Each client runs a dense statevector simulation of a 4-qubit RX-embedded,
//! RY/CNOT-layered circuit, trains it locally with Adam on parameter-shift
//! gradients, and ships its parameters to a server that averages them.

pub mod data;
pub mod error;
pub mod federated;
pub mod metrics;
pub mod qnn;
pub mod sim;
pub mod training;
pub mod experiment;

pub use error::{Error, Result, TransportError};
