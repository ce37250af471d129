//! Brute-force dense-matrix reference path.
//!
//! Builds the full `2^n × 2^n` unitary of a circuit from Kronecker products and
//! applies it with a single matrix-vector product. It shares no code with the
//! strided kernels in [`super::statevector`] and exists to check them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::gate::{Gate, Observable};
use super::statevector::Statevector;
use crate::error::{Error, Result};

/// Largest Hilbert-space dimension the oracle will materialize.
pub const ORACLE_MAX_DIM: usize = 1 << 10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn from_rows(rows: &[Vec<Complex64>]) -> DMatrix<Complex64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn check_dim(num_qubits: usize) -> Result<usize> {
    let dim = 1usize
        .checked_shl(num_qubits as u32)
        .filter(|d| *d <= ORACLE_MAX_DIM)
        .ok_or(Error::OracleScope {
            dim: 1usize.checked_shl(num_qubits as u32).unwrap_or(usize::MAX),
            max: ORACLE_MAX_DIM,
        })?;
    Ok(dim)
}

/// Kronecker chain with `ops[q]` placed on qubit `q` (qubit 0 leftmost).
fn kron_chain(ops: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, op| acc.kronecker(op))
}

/// Full-register unitary of one gate.
pub fn gate_unitary(gate: &Gate, num_qubits: usize) -> Result<DMatrix<Complex64>> {
    check_dim(num_qubits)?;
    gate.validate(num_qubits)?;
    let identity = DMatrix::<Complex64>::identity(2, 2);
    match *gate {
        Gate::Cnot { control, target } => {
            let p0 = DMatrix::from_row_slice(2, 2, &[c(1.), c(0.), c(0.), c(0.)]);
            let p1 = DMatrix::from_row_slice(2, 2, &[c(0.), c(0.), c(0.), c(1.)]);
            let x = DMatrix::from_row_slice(2, 2, &[c(0.), c(1.), c(1.), c(0.)]);
            let mut idle = vec![identity.clone(); num_qubits];
            idle[control] = p0;
            let mut flip = vec![identity; num_qubits];
            flip[control] = p1;
            flip[target] = x;
            Ok(kron_chain(&idle) + kron_chain(&flip))
        }
        _ => {
            let mut ops = vec![identity; num_qubits];
            ops[gate.qubits()[0]] = from_rows(&gate.local_matrix());
            Ok(kron_chain(&ops))
        }
    }
}

/// Product `G_k ⋯ G_1` for the circuit `[G_1, …, G_k]`.
pub fn circuit_unitary(gates: &[Gate], num_qubits: usize) -> Result<DMatrix<Complex64>> {
    let dim = check_dim(num_qubits)?;
    let mut unitary = DMatrix::<Complex64>::identity(dim, dim);
    for gate in gates {
        unitary = gate_unitary(gate, num_qubits)? * unitary;
    }
    Ok(unitary)
}

/// Applies `circuit` to `state` through the explicit full unitary.
pub fn dense_oracle_apply(state: &Statevector, circuit: &[Gate]) -> Result<Statevector> {
    let n = state.num_qubits();
    let unitary = circuit_unitary(circuit, n)?;
    let psi = DVector::from_column_slice(state.amplitudes());
    let out = unitary * psi;
    Statevector::from_amplitudes(out.iter().copied().collect())
}

/// Full-register matrix of an observable.
pub fn observable_matrix(obs: &Observable, num_qubits: usize) -> Result<DMatrix<Complex64>> {
    check_dim(num_qubits)?;
    if obs.qubit() >= num_qubits {
        return Err(Error::Argument(format!(
            "observable on qubit {} for {num_qubits} qubits",
            obs.qubit()
        )));
    }
    let local = obs.local_matrix();
    let rows: Vec<Vec<Complex64>> = local.iter().map(|r| r.to_vec()).collect();
    let mut ops = vec![DMatrix::<Complex64>::identity(2, 2); num_qubits];
    ops[obs.qubit()] = from_rows(&rows);
    Ok(kron_chain(&ops))
}

/// `⟨ψ|M|ψ⟩` by explicit matrix products. Returns the complex value so callers
/// can inspect the imaginary residue.
pub fn dense_expectation(state: &Statevector, obs: &Observable) -> Result<Complex64> {
    let m = observable_matrix(obs, state.num_qubits())?;
    let psi = DVector::from_column_slice(state.amplitudes());
    Ok((psi.adjoint() * (m * &psi))[(0, 0)])
}
