//! Dense statevector simulation of few-qubit circuits.

mod gate;
pub mod oracle;
mod statevector;

pub use gate::{Gate, Matrix2, Observable};
pub use oracle::dense_oracle_apply;
pub use statevector::{apply_gate, expectation, init_zero_state, Statevector, MAX_QUBITS};
