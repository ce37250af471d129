use num_complex::Complex64;

use super::gate::{Gate, Matrix2, Observable};
use crate::error::{Error, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 20;

/// Dense `2^n` amplitude vector.
///
/// Qubit 0 is the most significant bit of the basis-state index, so for
/// three qubits `|q0 q1 q2⟩ = |100⟩` lives at index 4.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "num_qubits must be in 1..={MAX_QUBITS}, got {num_qubits}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The length must be a power of two and the vector normalized.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Argument(format!(
                "amplitude count {len} is not a power of two ≥ 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "{num_qubits} qubits exceeds the {MAX_QUBITS} qubit limit"
            )));
        }
        let state = Self {
            num_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Argument(format!(
                "amplitudes are not normalized (‖ψ‖² = {norm})"
            )));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn bit(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    /// Applies `gate` in place with a strided kernel, O(2^n) per gate.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match *gate {
            Gate::Cnot { control, target } => {
                let cbit = self.bit(control);
                let tbit = self.bit(target);
                for i in 0..self.amplitudes.len() {
                    if i & cbit != 0 && i & tbit == 0 {
                        self.amplitudes.swap(i, i | tbit);
                    }
                }
            }
            _ => {
                let qubit = gate.qubits()[0];
                // single_qubit_matrix is Some for every non-CNOT gate
                let m = gate.single_qubit_matrix().expect("single-qubit gate");
                self.apply_single(qubit, &m);
            }
        }
        Ok(())
    }

    fn apply_single(&mut self, qubit: usize, m: &Matrix2) {
        let stride = self.bit(qubit);
        let len = self.amplitudes.len();
        let mut block = 0;
        while block < len {
            for i in block..block + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            block += 2 * stride;
        }
    }

    /// Applies every gate of `circuit` in order.
    pub fn apply_all<'a>(&mut self, circuit: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for gate in circuit {
            self.apply(gate)?;
        }
        Ok(())
    }

    /// `⟨ψ|M|ψ⟩` for a diagonal Pauli observable.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        let qubit = obs.qubit();
        if qubit >= self.num_qubits {
            return Err(Error::Argument(format!(
                "observable on qubit {qubit} for a {}-qubit state",
                self.num_qubits
            )));
        }
        let bit = self.bit(qubit);
        let value = match obs {
            Observable::PauliZ(_) => self
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                .sum(),
        };
        Ok(value)
    }
}

/// `|0…0⟩` on `num_qubits` qubits.
pub fn init_zero_state(num_qubits: usize) -> Result<Statevector> {
    Statevector::zero(num_qubits)
}

/// Returns a new state with `gate` applied; the input is left untouched.
pub fn apply_gate(state: &Statevector, gate: &Gate) -> Result<Statevector> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

pub fn expectation(state: &Statevector, obs: &Observable) -> Result<f64> {
    state.expectation(obs)
}
