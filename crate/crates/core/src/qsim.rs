//! Dense statevector simulator.
//!
//! Qubit `k` of an `n`-qubit register corresponds to bit `k` of the basis
//! index, so qubit 0 is the least significant bit. All quantities are computed
//! exactly from the amplitudes; there is no shot sampling.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the simulator will allocate (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

/// Tolerance used when validating that a state is normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Tolerance used when validating classical data destined for amplitude embedding.
pub const EMBED_NORM_TOLERANCE: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// Gate set understood by the simulator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    /// `RY(θ) = exp(-iθY/2)`
    Ry(usize, f64),
    /// `RZ(θ) = exp(-iθZ/2)`
    Rz(usize, f64),
    Cnot { control: usize, target: usize },
    Cz(usize, usize),
    /// Controlled swap (Fredkin).
    Cswap { control: usize, a: usize, b: usize },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Z(q) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Cz(a, b) => vec![a, b],
            Gate::Cswap { control, a, b } => vec![control, a, b],
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Gate::H(_) | Gate::X(_) | Gate::Z(_) | Gate::Ry(..) | Gate::Rz(..) => 1,
            Gate::Cnot { .. } | Gate::Cz(..) => 2,
            Gate::Cswap { .. } => 3,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Ry(_, t) | Gate::Rz(_, t) => Some(t),
            _ => None,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let qubits = self.qubits();
        check_indices(&qubits, n_qubits)?;
        if let Some(theta) = self.angle() {
            if !theta.is_finite() {
                return Err(Error::NonFiniteAngle(theta));
            }
        }
        Ok(())
    }
}

fn check_indices(qubits: &[usize], n_qubits: usize) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::QubitIndex { index: q, n_qubits });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::DuplicateQubits(qubits.to_vec()));
        }
    }
    Ok(())
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::QubitCount(n_qubits))
    }
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps an amplitude vector, checking length and normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::AmplitudeLength {
                len,
                n_qubits: len.next_power_of_two().trailing_zeros() as usize,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        let state = Self { n_qubits, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Tensor product with `self` on the low qubits and `other` on the high ones.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n_qubits = self.n_qubits + other.n_qubits;
        check_qubit_count(n_qubits)?;
        let mut amps = Vec::with_capacity(1 << n_qubits);
        for hi in &other.amps {
            amps.extend(self.amps.iter().map(|lo| lo * hi));
        }
        Ok(StateVector { n_qubits, amps })
    }

    /// Applies one gate in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for gate in gates {
            self.apply(gate)?;
        }
        Ok(())
    }

    fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::H(q) => self.for_pairs(q, |a, b| {
                let (x, y) = (*a, *b);
                *a = (x + y) * FRAC_1_SQRT_2;
                *b = (x - y) * FRAC_1_SQRT_2;
            }),
            Gate::X(q) => self.for_pairs(q, std::mem::swap),
            Gate::Z(q) => self.for_pairs(q, |_, b| *b = -*b),
            Gate::Ry(q, theta) => {
                let (s, c) = (theta / 2.0).sin_cos();
                self.for_pairs(q, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                })
            }
            Gate::Rz(q, theta) => {
                let phase = Complex64::from_polar(1.0, theta / 2.0);
                let phase_conj = phase.conj();
                self.for_pairs(q, |a, b| {
                    *a *= phase_conj;
                    *b *= phase;
                })
            }
            Gate::Cnot { control, target } => {
                let (cm, tm) = (1 << control, 1 << target);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            Gate::Cz(a, b) => {
                let mask = (1 << a) | (1 << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            Gate::Cswap { control, a, b } => {
                let (cm, am, bm) = (1 << control, 1 << a, 1 << b);
                for i in 0..self.amps.len() {
                    // visit each swapped pair once, from the |a=1, b=0⟩ side
                    if i & cm != 0 && i & am != 0 && i & bm == 0 {
                        self.amps.swap(i, (i & !am) | bm);
                    }
                }
            }
        }
    }

    /// Calls `f(|…0_q…⟩, |…1_q…⟩)` on every amplitude pair differing in qubit `q`.
    fn for_pairs(&mut self, q: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let mask = 1usize << q;
        for block in self.amps.chunks_exact_mut(mask << 1) {
            let (lo, hi) = block.split_at_mut(mask);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }
}

pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::zero(n_qubits)
}

/// Returns a new state with `gate` applied; the input is left untouched.
pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

/// Angle encoding: value `v` on qubit `i` becomes `RY(π·v)` applied to `|0⟩`.
pub fn angle_encode(values: &[f64]) -> Result<StateVector> {
    let mut state = StateVector::zero(values.len())?;
    for (q, &v) in values.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "angle-encoded value {v} at position {q} outside [0, 1]"
            )));
        }
        state.apply_unchecked(&Gate::Ry(q, PI * v));
    }
    Ok(state)
}

/// Loads a unit-norm real vector into the leading amplitudes, zero-padding the rest.
pub fn amplitude_embed(values: &[f64], n_qubits: usize) -> Result<StateVector> {
    check_qubit_count(n_qubits)?;
    let dim = 1usize << n_qubits;
    if values.len() > dim {
        return Err(Error::invalid(format!(
            "{} values do not fit in {n_qubits} qubits",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("embedded value {v}")));
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > EMBED_NORM_TOLERANCE {
        return Err(Error::NotNormalized { norm });
    }
    let mut amps = vec![ZERO; dim];
    for (a, &v) in amps.iter_mut().zip(values) {
        *a = Complex64::new(v, 0.0);
    }
    Ok(StateVector { n_qubits, amps })
}

/// `⟨Z_qubit⟩`, exact.
pub fn expectation_z(state: &StateVector, qubit: usize) -> Result<f64> {
    check_indices(&[qubit], state.n_qubits)?;
    let mask = 1usize << qubit;
    Ok(state
        .amps
        .iter()
        .enumerate()
        .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum())
}

/// Outcome probabilities on a qubit subset. Bit `j` of the outcome index is the
/// value measured on `qubits[j]`.
pub fn marginal_probabilities(state: &StateVector, qubits: &[usize]) -> Result<Vec<f64>> {
    check_indices(qubits, state.n_qubits)?;
    let mut out = vec![0.0; 1 << qubits.len()];
    for (i, a) in state.amps.iter().enumerate() {
        let mut outcome = 0;
        for (j, &q) in qubits.iter().enumerate() {
            outcome |= ((i >> q) & 1) << j;
        }
        out[outcome] += a.norm_sqr();
    }
    Ok(out)
}

/// `⟨psi|phi⟩`.
pub fn inner_product(psi: &StateVector, phi: &StateVector) -> Result<Complex64> {
    if psi.n_qubits != phi.n_qubits {
        return Err(Error::SizeMismatch {
            left: psi.n_qubits,
            right: phi.n_qubits,
        });
    }
    Ok(psi.amps.iter().zip(&phi.amps).map(|(a, b)| a.conj() * b).sum())
}

/// Runs the H–CSWAP–H network on `|psi⟩|phi⟩|0⟩_anc` and returns `P(anc = 0)`.
pub fn swap_test_fidelity(psi: &StateVector, phi: &StateVector) -> Result<f64> {
    if psi.n_qubits != phi.n_qubits {
        return Err(Error::SizeMismatch {
            left: psi.n_qubits,
            right: phi.n_qubits,
        });
    }
    let n = psi.n_qubits;
    let joint = psi.tensor(phi)?.tensor(&StateVector::zero(1)?)?;
    let reg_a: Vec<usize> = (0..n).collect();
    let reg_b: Vec<usize> = (n..2 * n).collect();
    partial_swap_test(&joint, &reg_a, &reg_b, 2 * n)
}

/// SWAP test between two equally sized sub-registers of a joint state.
///
/// The ancilla must be a qubit of `joint` prepared in `|0⟩`. The result is
/// `(1 + ⟨SWAP_AB⟩) / 2`, which equals `(1 + Tr(ρ_A ρ_B)) / 2` when the two
/// registers are uncorrelated. It is obtained by simulating the circuit.
pub fn partial_swap_test(
    joint: &StateVector,
    register_a: &[usize],
    register_b: &[usize],
    ancilla: usize,
) -> Result<f64> {
    if register_a.len() != register_b.len() {
        return Err(Error::LengthMismatch {
            left: register_a.len(),
            right: register_b.len(),
        });
    }
    let mut all: Vec<usize> = register_a.iter().chain(register_b).copied().collect();
    all.push(ancilla);
    check_indices(&all, joint.n_qubits)?;
    let anc_one = marginal_probabilities(joint, &[ancilla])?[1];
    if anc_one > NORM_TOLERANCE {
        return Err(Error::AncillaNotReset(ancilla));
    }

    let mut state = joint.clone();
    state.apply_unchecked(&Gate::H(ancilla));
    for (&a, &b) in register_a.iter().zip(register_b) {
        state.apply_unchecked(&Gate::Cswap {
            control: ancilla,
            a,
            b,
        });
    }
    state.apply_unchecked(&Gate::H(ancilla));
    Ok(marginal_probabilities(&state, &[ancilla])?[0])
}
