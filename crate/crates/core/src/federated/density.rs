//! Averaging of density matrices.
//!
//! These aggregate quantum states rather than classical parameters. They are
//! standalone tools and are not part of the parameter-averaging round loop.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Statevector;

pub type CMatrix = DMatrix<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

/// Hermitian, positive-semidefinite, unit-trace matrix of dimension `2^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_part(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

impl DensityMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let d = entries.nrows();
        if d == 0 || d != entries.ncols() || !d.is_power_of_two() {
            return Err(Error::Argument(format!(
                "density matrix must be square with power-of-two dimension, got {}×{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let herm = hermitian_defect(&entries);
        if herm >= HERMITIAN_TOL {
            return Err(Error::Argument(format!("matrix is not Hermitian (defect {herm:e})")));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() >= TRACE_TOL || trace.im.abs() >= TRACE_TOL {
            return Err(Error::Argument(format!("trace is {trace}, expected 1")));
        }
        let lmin = min_eigenvalue(&entries);
        if lmin < -PSD_TOL {
            return Err(Error::Argument(format!("negative eigenvalue {lmin:e}")));
        }
        Ok(Self(entries))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(state: &Statevector) -> Self {
        let amps = state.amplitudes();
        let d = amps.len();
        Self(CMatrix::from_fn(d, d, |i, j| amps[i] * amps[j].conj()))
    }

    /// Real diagonal state `diag(p)`; `p` must be a probability vector.
    pub fn diagonal(probabilities: &[f64]) -> Result<Self> {
        let d = probabilities.len();
        Self::new(CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(probabilities[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

/// Schatten `q`-norm `(Σ σ_i^q)^{1/q}` from the singular values of `m`.
pub fn schatten_norm(m: &CMatrix, q: f64) -> f64 {
    let sv = m.clone().singular_values();
    if q.is_infinite() {
        return sv.iter().copied().fold(0.0, f64::max);
    }
    sv.iter().map(|s| s.powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Rebuilds `Σ f(λ_k) v_k v_k†` from the eigenpairs of a Hermitian matrix.
fn spectral_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let eig = hermitian_part(m).symmetric_eigen();
    let d = m.nrows();
    let mut out = CMatrix::zeros(d, d);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let w = f(lambda);
        if w == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()) * Complex64::new(w, 0.0);
    }
    out
}

/// Eigenvalue clipping at zero followed by trace renormalization.
pub fn clip_to_density(m: &CMatrix) -> Result<DensityMatrix> {
    let clipped = spectral_map(m, |l| l.max(0.0));
    let trace = clipped.trace().re;
    if trace <= 0.0 {
        return Err(Error::Numeric("matrix has no positive spectrum to renormalize".into()));
    }
    DensityMatrix::new(hermitian_part(&(clipped / Complex64::new(trace, 0.0))))
}

/// Euclidean projection of a probability vector's worth of eigenvalues onto the simplex.
fn simplex_projection(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    values.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Frobenius-nearest density matrix to a Hermitian `m`.
pub fn project_to_density(m: &CMatrix) -> Result<DensityMatrix> {
    let h = hermitian_part(m);
    let eig = h.clone().symmetric_eigen();
    let projected = simplex_projection(eig.eigenvalues.as_slice());
    let d = m.nrows();
    let mut out = CMatrix::zeros(d, d);
    for (k, &w) in projected.iter().enumerate() {
        if w > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += (v * v.adjoint()) * Complex64::new(w, 0.0);
        }
    }
    DensityMatrix::new(hermitian_part(&out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMetric {
    /// `d(ρ, σ) = ‖ρ − σ‖_F`.
    #[default]
    HilbertSchmidt,
}

fn check_inputs(states: &[DensityMatrix]) -> Result<usize> {
    let first = states
        .first()
        .ok_or_else(|| Error::Argument("no density matrices to average".into()))?;
    let d = first.dim();
    if let Some(bad) = states.iter().find(|s| s.dim() != d) {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {d}",
            bad.dim()
        )));
    }
    Ok(d)
}

fn arithmetic_mean(states: &[DensityMatrix], d: usize) -> CMatrix {
    let mut sum = CMatrix::zeros(d, d);
    for s in states {
        sum += s.matrix();
    }
    sum / Complex64::new(states.len() as f64, 0.0)
}

/// Minimizer of `Σ d²(ρ, ρ_i)` over density matrices.
///
/// Under the Hilbert–Schmidt metric this is the arithmetic mean; the result
/// is passed through eigenvalue clipping to absorb rounding.
pub fn riemannian_average(states: &[DensityMatrix], metric: StateMetric) -> Result<DensityMatrix> {
    let d = check_inputs(states)?;
    match metric {
        StateMetric::HilbertSchmidt => clip_to_density(&arithmetic_mean(states, d)),
    }
}

/// Tuning of the projected subgradient solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub initial_step: f64,
    pub tolerance: f64,
    /// Starting iterate; the arithmetic mean when `None`.
    pub start: Option<DensityMatrix>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            initial_step: 0.05,
            tolerance: 1e-13,
            start: None,
        }
    }
}

/// `Σ_i ‖ρ − ρ_i‖_q`.
pub fn schatten_objective(rho: &CMatrix, states: &[DensityMatrix], q: f64) -> f64 {
    states.iter().map(|s| schatten_norm(&(rho - s.matrix()), q)).sum()
}

/// A subgradient of `‖A‖_q` at a Hermitian `A`.
fn norm_subgradient(a: &CMatrix, q: f64) -> CMatrix {
    let d = a.nrows();
    if q == 2.0 {
        let norm = a.norm();
        if norm < 1e-300 {
            return CMatrix::zeros(d, d);
        }
        return a / Complex64::new(norm, 0.0);
    }
    // q == 1: Σ sign(λ_k) v_k v_k†, zero on the null space
    spectral_map(a, |l| if l.abs() < 1e-14 { 0.0 } else { l.signum() })
}

/// Minimizer of `Σ ‖ρ − ρ_i‖_q` over density matrices, `q ∈ {1, 2}`.
///
/// Projected subgradient descent, by default started at the arithmetic mean. For `q = 2`
/// the step at each iterate is the Weiszfeld step `1 / Σ_i ‖ρ − ρ_i‖⁻¹`;
/// for `q = 1` it is a diminishing `η₀/√t`. The best iterate is returned.
pub fn schatten_average(
    states: &[DensityMatrix],
    q: f64,
    options: SolverOptions,
) -> Result<DensityMatrix> {
    if q != 1.0 && q != 2.0 {
        return Err(Error::Argument(format!(
            "Schatten averaging supports q = 1 or q = 2, got {q}"
        )));
    }
    let d = check_inputs(states)?;
    let mut rho = match &options.start {
        Some(s) if s.dim() != d => {
            return Err(Error::Argument(format!(
                "start has dimension {}, inputs have {d}",
                s.dim()
            )))
        }
        Some(s) => s.matrix().clone(),
        None => project_to_density(&arithmetic_mean(states, d))?.into_matrix(),
    };
    let mut best = rho.clone();
    let mut best_obj = schatten_objective(&rho, states, q);

    for t in 1..=options.max_iterations {
        let mut grad = CMatrix::zeros(d, d);
        let mut inverse_distance = 0.0;
        for s in states {
            let diff = &rho - s.matrix();
            grad += norm_subgradient(&diff, q);
            let dist = diff.norm();
            if dist > 1e-300 {
                inverse_distance += 1.0 / dist;
            }
        }
        if grad.norm() < options.tolerance {
            break;
        }
        let step = if q == 2.0 && inverse_distance > 0.0 {
            1.0 / inverse_distance
        } else {
            options.initial_step / (t as f64).sqrt()
        };
        rho = project_to_density(&(&rho - grad * Complex64::new(step, 0.0)))?.into_matrix();
        let obj = schatten_objective(&rho, states, q);
        if obj < best_obj {
            let improvement = best_obj - obj;
            best_obj = obj;
            best = rho.clone();
            if q == 2.0 && improvement < options.tolerance {
                break;
            }
        }
    }
    DensityMatrix::new(hermitian_part(&best))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn validation() {
        assert!(DensityMatrix::diagonal(&[0.5, 0.5]).is_ok());
        assert!(DensityMatrix::diagonal(&[0.6, 0.6]).is_err());
        assert!(DensityMatrix::diagonal(&[1.5, -0.5]).is_err());
        assert!(DensityMatrix::diagonal(&[1.0, 0.0, 0.0]).is_err());
        let non_herm = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0.1, 0.), c(0.0, 0.), c(0.5, 0.)]);
        assert!(DensityMatrix::new(non_herm).is_err());
    }

    #[test]
    fn schatten_norms_of_known_matrices() {
        let m = CMatrix::from_row_slice(2, 2, &[c(3., 0.), c(0., 0.), c(0., 0.), c(-4., 0.)]);
        assert!((schatten_norm(&m, 1.0) - 7.0).abs() < 1e-12);
        assert!((schatten_norm(&m, 2.0) - 5.0).abs() < 1e-12);
        assert!((schatten_norm(&m, f64::INFINITY) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn average_of_basis_states() {
        let zero = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let one = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
        let avg = riemannian_average(&[zero, one], StateMetric::HilbertSchmidt).unwrap();
        let expected = DensityMatrix::diagonal(&[0.5, 0.5]).unwrap();
        assert!((avg.matrix() - expected.matrix()).norm() < 1e-15);
    }

    #[test]
    fn unsupported_q_and_bad_inputs() {
        let s = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        assert!(schatten_average(std::slice::from_ref(&s), 3.0, SolverOptions::default()).is_err());
        assert!(riemannian_average(&[], StateMetric::HilbertSchmidt).is_err());
        let big = DensityMatrix::diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(riemannian_average(&[s, big], StateMetric::HilbertSchmidt).is_err());
    }

    #[test]
    fn simplex_projection_cases() {
        assert_eq!(simplex_projection(&[0.3, 0.7]), vec![0.3, 0.7]);
        assert_eq!(simplex_projection(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = simplex_projection(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }
}
