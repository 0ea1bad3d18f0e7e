//! Variational generator circuits: the layered RY + ring-CNOT ansatz, its
//! parameter-shift gradient and the qubit/depth/parameter accounting used for
//! resource reports.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{Gate, StateVector};

pub const DEFAULT_LAYERS: usize = 3;

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub fn ceil_log2(n: usize) -> usize {
    n.next_power_of_two().trailing_zeros() as usize
}

/// Qubits needed for a past window `b` and future window `f`: a generator
/// register, a data register and one SWAP-test ancilla.
pub fn qubits_required(b: usize, f: usize) -> Result<usize> {
    if b == 0 || f == 0 {
        return Err(Error::invalid(format!("window sizes must be positive, got ({b}, {f})")));
    }
    Ok(ceil_log2(b) + ceil_log2(f) + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl AnsatzSpec {
    pub fn new(n_qubits: usize, n_layers: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("ansatz needs at least one qubit"));
        }
        if n_layers == 0 {
            return Err(Error::invalid("ansatz needs at least one layer"));
        }
        Ok(Self { n_qubits, n_layers })
    }

    pub fn n_params(&self) -> usize {
        self.n_layers * self.n_qubits
    }

    /// CNOT (control, target) pairs of one entangling layer, in local indices.
    ///
    /// A two-qubit ring has a single distinct edge, so it gets one CNOT.
    pub fn ring(&self) -> Vec<(usize, usize)> {
        match self.n_qubits {
            1 => vec![],
            2 => vec![(0, 1)],
            n => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        }
    }

    /// The gate sequence acting on `register` (local qubit `k` is `register[k]`).
    pub fn gates(&self, params: &[f64], register: &[usize]) -> Result<Vec<Gate>> {
        if register.len() != self.n_qubits {
            return Err(Error::LengthMismatch {
                left: register.len(),
                right: self.n_qubits,
            });
        }
        if params.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: self.n_params(),
            });
        }
        let ring = self.ring();
        let mut gates = Vec::with_capacity(self.n_layers * (self.n_qubits + ring.len()));
        for layer in params.chunks_exact(self.n_qubits) {
            gates.extend(layer.iter().zip(register).map(|(&t, &q)| Gate::Ry(q, t)));
            gates.extend(ring.iter().map(|&(c, t)| Gate::Cnot {
                control: register[c],
                target: register[t],
            }));
        }
        Ok(gates)
    }
}

/// Trainable rotation angles, laid out layer-major then qubit-ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if let Some(t) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {t}")));
        }
        Ok(Self(theta))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn apply_ansatz(
    state: &StateVector,
    spec: &AnsatzSpec,
    params: &ParamVector,
    register: &[usize],
) -> Result<StateVector> {
    let mut out = state.clone();
    apply_ansatz_in_place(&mut out, spec, params.as_slice(), register)?;
    Ok(out)
}

pub fn apply_ansatz_in_place(
    state: &mut StateVector,
    spec: &AnsatzSpec,
    params: &[f64],
    register: &[usize],
) -> Result<()> {
    let gates = spec.gates(params, register)?;
    state.apply_all(&gates)
}

/// Parameter-shift gradient of an expectation-valued loss of RY angles:
/// `gᵢ = [L(θ + π/2·eᵢ) − L(θ − π/2·eᵢ)] / 2`.
///
/// Shifted evaluations run in parallel; each component is reduced by index so
/// the result does not depend on scheduling.
pub fn parameter_shift_gradient<F>(loss: F, params: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..params.len())
        .into_par_iter()
        .map(|i| {
            let mut shifted = params.to_vec();
            shifted[i] = params[i] + FRAC_PI_2;
            let plus = loss(&shifted);
            shifted[i] = params[i] - FRAC_PI_2;
            let minus = loss(&shifted);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at shifted parameter {i}: {plus}, {minus}"
                )));
            }
            Ok((plus - minus) / 2.0)
        })
        .collect()
}

/// Gate-count model for amplitude embedding of `n` qubits (multiplexed RY
/// cascade): `2^(n+1) − 2`.
pub fn embed_depth(n_qubits: usize) -> usize {
    (1usize << (n_qubits + 1)) - 2
}

pub fn ansatz_depth(n_layers: usize) -> usize {
    2 * n_layers
}

pub fn swap_test_depth(data_qubits: usize) -> usize {
    data_qubits + 2
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub b: usize,
    pub f: usize,
    pub layers: usize,
    pub qubits: usize,
    pub depth: usize,
    pub trainable_params: usize,
    pub embed_depth: usize,
    pub ansatz_depth: usize,
    pub swap_test_depth: usize,
}

/// Description of the depth model, written next to every report.
pub const DEPTH_MODEL: &str =
    "depth = (2^(n_b+1) - 2) + 2*L + (n_f + 2); n_b = ceil(log2 b), n_f = ceil(log2 f)";

pub fn resource_report(b: usize, f: usize, n_layers: usize) -> Result<ResourceReport> {
    let qubits = qubits_required(b, f)?;
    if n_layers == 0 {
        return Err(Error::invalid("ansatz needs at least one layer"));
    }
    let (n_b, n_f) = (ceil_log2(b), ceil_log2(f));
    let (embed, ansatz, swap) = (embed_depth(n_b), ansatz_depth(n_layers), swap_test_depth(n_f));
    Ok(ResourceReport {
        b,
        f,
        layers: n_layers,
        qubits,
        depth: embed + ansatz + swap,
        trainable_params: n_layers * n_b,
        embed_depth: embed,
        ansatz_depth: ansatz,
        swap_test_depth: swap,
    })
}
