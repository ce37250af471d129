//! The variational classifier: RX angle embedding, a layered RY/CNOT ansatz,
//! Pauli-Z readout and parameter-shift gradients.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Gate, Observable, Statevector};

const FEATURE_SLACK: f64 = 1e-9;

/// Shape of the ansatz: an initial Hadamard wall followed by `num_layers`
/// blocks of (RY on every qubit, CNOT ring).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub readout_qubits: Vec<usize>,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        Self {
            num_qubits: 4,
            num_layers: 4,
            readout_qubits: vec![0],
        }
    }
}

impl CircuitSpec {
    pub fn new(num_qubits: usize, num_layers: usize, readout_qubits: Vec<usize>) -> Result<Self> {
        let spec = Self {
            num_qubits,
            num_layers,
            readout_qubits,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_qubits == 0 || self.num_qubits > crate::sim::MAX_QUBITS {
            return Err(Error::Config(format!(
                "num_qubits must be in 1..={}, got {}",
                crate::sim::MAX_QUBITS,
                self.num_qubits
            )));
        }
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be at least 1".into()));
        }
        if self.readout_qubits.is_empty() {
            return Err(Error::Config("at least one readout qubit is required".into()));
        }
        for (i, &q) in self.readout_qubits.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(Error::Config(format!(
                    "readout qubit {q} outside a {}-qubit register",
                    self.num_qubits
                )));
            }
            if self.readout_qubits[..i].contains(&q) {
                return Err(Error::Config(format!("readout qubit {q} listed twice")));
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.num_layers * self.num_qubits
    }

    fn check_params(&self, params: &ParameterVector) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Config(format!(
                "circuit expects {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        Ok(())
    }
}

/// Trainable rotation angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    fn with_shift(&self, index: usize, delta: f64) -> Self {
        let mut shifted = self.0.clone();
        shifted[index] += delta;
        Self(shifted)
    }
}

impl AsRef<[f64]> for ParameterVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Classical features already scaled into `[0, π]`, one per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(-FEATURE_SLACK..=PI + FEATURE_SLACK).contains(&v) {
                return Err(Error::Argument(format!(
                    "feature {i} = {v} lies outside [0, π]"
                )));
            }
        }
        Ok(Self(values))
    }

    /// Pads with zeros up to `num_qubits`; `RX(0)` leaves the extra qubits in `|0⟩`.
    pub fn padded(values: &[f64], num_qubits: usize) -> Result<Self> {
        if values.len() > num_qubits {
            return Err(Error::Config(format!(
                "{} features do not fit {num_qubits} qubits",
                values.len()
            )));
        }
        let mut v = values.to_vec();
        v.resize(num_qubits, 0.0);
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `RX(x_q)` on qubit `q` of `|0…0⟩`.
pub fn angle_embed(features: &FeatureVector) -> Result<Statevector> {
    let mut state = Statevector::zero(features.len())?;
    for (q, &x) in features.as_slice().iter().enumerate() {
        state.apply(&Gate::rx(q, x))?;
    }
    Ok(state)
}

fn embed_for(spec: &CircuitSpec, features: &FeatureVector) -> Result<Statevector> {
    if features.len() != spec.num_qubits {
        return Err(Error::Config(format!(
            "{} features for a {}-qubit circuit",
            features.len(),
            spec.num_qubits
        )));
    }
    angle_embed(features)
}

/// Gate list of `U(θ)`: H on every qubit, then per layer an RY wall using
/// `θ[layer·n + q]` and a CNOT ring `q → (q+1) mod n` (skipped for one qubit).
pub fn build_ansatz(spec: &CircuitSpec, params: &ParameterVector) -> Result<Vec<Gate>> {
    spec.validate()?;
    spec.check_params(params)?;
    let n = spec.num_qubits;
    let ring = if n > 1 { n } else { 0 };
    let mut gates = Vec::with_capacity(n + spec.num_layers * (n + ring));
    gates.extend((0..n).map(Gate::h));
    let theta = params.as_slice();
    for layer in 0..spec.num_layers {
        gates.extend((0..n).map(|q| Gate::ry(q, theta[layer * n + q])));
        if n > 1 {
            gates.extend((0..n).map(|q| Gate::cnot(q, (q + 1) % n)));
        }
    }
    Ok(gates)
}

fn readout_z(spec: &CircuitSpec, embedded: &Statevector, params: &ParameterVector) -> Result<Vec<f64>> {
    let mut state = embedded.clone();
    state.apply_all(&build_ansatz(spec, params)?)?;
    spec.readout_qubits
        .iter()
        .map(|&q| state.expectation(&Observable::PauliZ(q)))
        .collect()
}

/// `⟨Z_c⟩` for every readout qubit.
pub fn readout_expectations(
    spec: &CircuitSpec,
    params: &ParameterVector,
    features: &FeatureVector,
) -> Result<Vec<f64>> {
    let embedded = embed_for(spec, features)?;
    readout_z(spec, &embedded, params)
}

fn z_to_prob(z: f64) -> f64 {
    ((1.0 - z) / 2.0).clamp(0.0, 1.0)
}

/// Class-1 probabilities `p_c = (1 − ⟨Z_c⟩)/2`, one per readout qubit.
pub fn forward(
    spec: &CircuitSpec,
    params: &ParameterVector,
    features: &FeatureVector,
) -> Result<Vec<f64>> {
    Ok(readout_expectations(spec, params, features)?
        .into_iter()
        .map(z_to_prob)
        .collect())
}

/// `∂⟨Z_c⟩/∂θ_j` by the two-term shift rule, indexed `[c][j]`.
pub fn expectation_jacobian(
    spec: &CircuitSpec,
    params: &ParameterVector,
    features: &FeatureVector,
) -> Result<Vec<Vec<f64>>> {
    spec.check_params(params)?;
    let embedded = embed_for(spec, features)?;
    let outputs = spec.readout_qubits.len();
    let mut jac = vec![vec![0.0; params.len()]; outputs];
    for j in 0..params.len() {
        let plus = readout_z(spec, &embedded, &params.with_shift(j, FRAC_PI_2))?;
        let minus = readout_z(spec, &embedded, &params.with_shift(j, -FRAC_PI_2))?;
        for c in 0..outputs {
            jac[c][j] = (plus[c] - minus[c]) / 2.0;
        }
    }
    Ok(jac)
}

/// Gradient of one sample's squared-error term `(1/C) Σ_c (p_c − y_c)²`.
///
/// Returns the gradient together with the sample loss at `params`.
pub fn parameter_shift_grad(
    spec: &CircuitSpec,
    params: &ParameterVector,
    features: &FeatureVector,
    targets: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let outputs = spec.readout_qubits.len();
    if targets.len() != outputs {
        return Err(Error::Argument(format!(
            "{} targets for {outputs} readout qubits",
            targets.len()
        )));
    }
    let probs = forward(spec, params, features)?;
    let jac = expectation_jacobian(spec, params, features)?;
    let scale = outputs as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for c in 0..outputs {
        let residual = probs[c] - targets[c];
        loss += residual * residual / scale;
        // dp/dz = -1/2
        let coeff = 2.0 * residual / scale * -0.5;
        for (g, dz) in grad.iter_mut().zip(&jac[c]) {
            *g += coeff * dz;
        }
    }
    Ok((grad, loss))
}

/// How classes beyond two are read out of the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MulticlassStrategy {
    /// One circuit, one readout qubit per class.
    #[default]
    MultiReadout,
    /// One single-readout circuit per class, parameters stacked end to end.
    OneVsRest,
}

/// A circuit (or stack of circuits) wired to a `num_classes` decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    circuit: CircuitSpec,
    num_classes: usize,
    strategy: MulticlassStrategy,
}

impl Classifier {
    pub fn new(
        num_qubits: usize,
        num_layers: usize,
        num_classes: usize,
        strategy: MulticlassStrategy,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let readout = if num_classes > 2 && strategy == MulticlassStrategy::MultiReadout {
            if num_classes > num_qubits {
                return Err(Error::Config(format!(
                    "{num_classes} classes need {num_classes} readout qubits but only {num_qubits} exist"
                )));
            }
            (0..num_classes).collect()
        } else {
            vec![0]
        };
        Ok(Self {
            circuit: CircuitSpec::new(num_qubits, num_layers, readout)?,
            num_classes,
            strategy,
        })
    }

    pub fn circuit(&self) -> &CircuitSpec {
        &self.circuit
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn blocks(&self) -> usize {
        match self.strategy {
            MulticlassStrategy::OneVsRest if self.num_classes > 2 => self.num_classes,
            _ => 1,
        }
    }

    pub fn num_params(&self) -> usize {
        self.blocks() * self.circuit.num_params()
    }

    pub fn num_outputs(&self) -> usize {
        if self.num_classes == 2 {
            1
        } else {
            self.num_classes
        }
    }

    fn block(&self, params: &ParameterVector, b: usize) -> ParameterVector {
        let p = self.circuit.num_params();
        ParameterVector(params.as_slice()[b * p..(b + 1) * p].to_vec())
    }

    fn check(&self, params: &ParameterVector) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Config(format!(
                "classifier expects {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        Ok(())
    }

    pub fn features(&self, values: &[f64]) -> Result<FeatureVector> {
        FeatureVector::padded(values, self.circuit.num_qubits)
    }

    /// Output probabilities, one per output slot.
    pub fn outputs(&self, params: &ParameterVector, features: &FeatureVector) -> Result<Vec<f64>> {
        self.check(params)?;
        if self.blocks() == 1 {
            return forward(&self.circuit, params, features);
        }
        let mut out = Vec::with_capacity(self.blocks());
        for b in 0..self.blocks() {
            out.extend(forward(&self.circuit, &self.block(params, b), features)?);
        }
        Ok(out)
    }

    /// Regression targets for a class label.
    pub fn targets(&self, label: usize) -> Vec<f64> {
        if self.num_classes == 2 {
            vec![label as f64]
        } else {
            (0..self.num_classes)
                .map(|c| if c == label { 1.0 } else { 0.0 })
                .collect()
        }
    }

    /// Decision rule: `p ≥ 0.5` is class 1 for binary tasks, otherwise argmax
    /// with ties going to the lowest class index.
    pub fn decide(&self, outputs: &[f64]) -> usize {
        if self.num_classes == 2 {
            return usize::from(outputs[0] >= 0.5);
        }
        let mut best = 0;
        for (c, &p) in outputs.iter().enumerate().skip(1) {
            if p > outputs[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict(&self, params: &ParameterVector, features: &FeatureVector) -> Result<usize> {
        Ok(self.decide(&self.outputs(params, features)?))
    }

    /// Squared-error loss of one sample, averaged over outputs, and its gradient.
    pub fn loss_and_grad(
        &self,
        params: &ParameterVector,
        features: &FeatureVector,
        label: usize,
    ) -> Result<(f64, Vec<f64>)> {
        self.check(params)?;
        let targets = self.targets(label);
        if self.blocks() == 1 {
            let (grad, loss) = parameter_shift_grad(&self.circuit, params, features, &targets)?;
            return Ok((loss, grad));
        }
        let scale = self.blocks() as f64;
        let mut grad = Vec::with_capacity(self.num_params());
        let mut loss = 0.0;
        for (b, target) in targets.iter().enumerate() {
            let (g, l) =
                parameter_shift_grad(&self.circuit, &self.block(params, b), features, &[*target])?;
            loss += l / scale;
            grad.extend(g.into_iter().map(|v| v / scale));
        }
        Ok((loss, grad))
    }
}
