use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A gate from the simulator's instruction set.
///
/// Rotations use the half-angle convention `R_P(θ) = exp(-iθP/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Gate {
    H { qubit: usize },
    X { qubit: usize },
    Y { qubit: usize },
    Rx { qubit: usize, angle: f64 },
    Ry { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn h(qubit: usize) -> Self {
        Gate::H { qubit }
    }

    pub fn x(qubit: usize) -> Self {
        Gate::X { qubit }
    }

    pub fn y(qubit: usize) -> Self {
        Gate::Y { qubit }
    }

    pub fn rx(qubit: usize, angle: f64) -> Self {
        Gate::Rx { qubit, angle }
    }

    pub fn ry(qubit: usize, angle: f64) -> Self {
        Gate::Ry { qubit, angle }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    /// Qubits touched by the gate, control first for CNOT.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H { qubit }
            | Gate::X { qubit }
            | Gate::Y { qubit }
            | Gate::Rx { qubit, .. }
            | Gate::Ry { qubit, .. } => vec![qubit],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { angle, .. } | Gate::Ry { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Checks that the gate fits a register of `num_qubits` qubits.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let qubits = self.qubits();
        if let Some(&q) = qubits.iter().find(|&&q| q >= num_qubits) {
            return Err(Error::Argument(format!(
                "{self} targets qubit {q} but the register has {num_qubits} qubits"
            )));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::Argument(format!(
                "{self} uses the same qubit as control and target"
            )));
        }
        if let Some(angle) = self.angle() {
            if !angle.is_finite() {
                return Err(Error::Argument(format!("{self} has a non-finite angle")));
            }
        }
        Ok(())
    }

    /// The 2×2 matrix of a single-qubit gate, `None` for CNOT.
    pub fn single_qubit_matrix(&self) -> Option<Matrix2> {
        let m = match *self {
            Gate::H { .. } => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            Gate::X { .. } => [[ZERO, ONE], [ONE, ZERO]],
            Gate::Y { .. } => [[ZERO, -I], [I, ZERO]],
            Gate::Rx { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let c = Complex64::new(c, 0.0);
                let ms = Complex64::new(0.0, -s);
                [[c, ms], [ms, c]]
            }
            Gate::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ]
            }
            Gate::Cnot { .. } => return None,
        };
        Some(m)
    }

    /// Matrix in the gate's local basis (`2^k × 2^k`, first listed qubit most significant).
    pub fn local_matrix(&self) -> Vec<Vec<Complex64>> {
        match self.single_qubit_matrix() {
            Some(m) => m.iter().map(|row| row.to_vec()).collect(),
            None => {
                let mut m = vec![vec![ZERO; 4]; 4];
                m[0][0] = ONE;
                m[1][1] = ONE;
                m[2][3] = ONE;
                m[3][2] = ONE;
                m
            }
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::H { qubit } => write!(f, "H q{qubit}"),
            Gate::X { qubit } => write!(f, "X q{qubit}"),
            Gate::Y { qubit } => write!(f, "Y q{qubit}"),
            Gate::Rx { qubit, angle } => write!(f, "RX({angle}) q{qubit}"),
            Gate::Ry { qubit, angle } => write!(f, "RY({angle}) q{qubit}"),
            Gate::Cnot { control, target } => write!(f, "CNOT q{control}->q{target}"),
        }
    }
}

/// Measurement operator. Only single-qubit Pauli-Z is needed by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    PauliZ(usize),
}

impl Observable {
    pub fn qubit(&self) -> usize {
        match *self {
            Observable::PauliZ(q) => q,
        }
    }

    pub fn local_matrix(&self) -> Matrix2 {
        match self {
            Observable::PauliZ(_) => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}
