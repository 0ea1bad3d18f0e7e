//! SWAP-test GANs. The generator register holds the amplitude-embedded past
//! window and is transformed by the ansatz; the discriminator is a partial
//! SWAP test between the generator's leading qubits and the embedded target.
//! The loss `1 − P(ancilla = 0)` is `(1 − Tr ρ_G ρ_D) / 2`, which lies in `[0, 0.5]`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{as_divergence, check_finite, EpochLoss, ModelArtifact, ModelKind, NormalizedGenerator, TrainConfig};
use crate::dataprep::{l2_normalize, WindowSpec, WindowedDataset};
use crate::error::{Error, Result};
use crate::neural::AdamState;
use crate::qsim::{amplitude_embed, marginal_probabilities, partial_swap_test, zero_state, StateVector, MAX_QUBITS};
use crate::vqc::{apply_ansatz_in_place, ceil_log2, parameter_shift_gradient, AnsatzSpec, ParamVector};

/// Losses may exceed the analytic range by float round-off only.
const LOSS_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FqganCircuit {
    pub spec: AnsatzSpec,
    pub theta: Vec<f64>,
    pub past: usize,
    /// Values read out per window: `f`, or `2f` for the invertible variant.
    pub target_len: usize,
    pub data_qubits: usize,
}

impl FqganCircuit {
    pub fn new(past: usize, target_len: usize, layers: usize, theta: Vec<f64>) -> Result<Self> {
        let (gen_q, data_q) = (ceil_log2(past), ceil_log2(target_len));
        if gen_q == 0 || data_q == 0 {
            return Err(Error::invalid(format!(
                "SWAP-test generators need b >= 2 and a target of at least 2 values, got b={past}, target={target_len}"
            )));
        }
        if data_q > gen_q {
            return Err(Error::invalid(format!(
                "target register ({data_q} qubits) larger than generator register ({gen_q} qubits)"
            )));
        }
        let total = gen_q + data_q + 1;
        if total > MAX_QUBITS {
            return Err(Error::QubitCount(total));
        }
        let spec = AnsatzSpec::new(gen_q, layers)?;
        if theta.len() != spec.n_params() {
            return Err(Error::LengthMismatch {
                left: theta.len(),
                right: spec.n_params(),
            });
        }
        Ok(Self {
            spec,
            theta,
            past,
            target_len,
            data_qubits: data_q,
        })
    }

    pub(super) fn from_artifact(artifact: &ModelArtifact) -> Result<Self> {
        let spec = artifact.ansatz.ok_or_else(|| artifact.missing("ansatz"))?;
        let theta = artifact.theta.as_ref().ok_or_else(|| artifact.missing("parameters"))?;
        Self::new(
            artifact.window.past,
            artifact.window.target_len(),
            spec.n_layers,
            theta.as_slice().to_vec(),
        )
    }

    pub fn n_qubits(&self) -> usize {
        self.spec.n_qubits + self.data_qubits + 1
    }

    fn gen_register(&self) -> Vec<usize> {
        (0..self.spec.n_qubits).collect()
    }

    /// `embed(past) ⊗ embed(target) ⊗ |0⟩`, generator register on the low qubits.
    pub fn joint_state(&self, past_unit: &[f64], target_unit: &[f64]) -> Result<StateVector> {
        self.check_lengths(past_unit, Some(target_unit))?;
        amplitude_embed(past_unit, self.spec.n_qubits)?
            .tensor(&amplitude_embed(target_unit, self.data_qubits)?)?
            .tensor(&zero_state(1)?)
    }

    /// Ancilla-zero probability after the ansatz and the partial SWAP test.
    pub fn swap_probability(&self, joint: &StateVector, theta: &[f64]) -> Result<f64> {
        let mut state = joint.clone();
        apply_ansatz_in_place(&mut state, &self.spec, theta, &self.gen_register())?;
        let nb = self.spec.n_qubits;
        let reg_a: Vec<usize> = (0..self.data_qubits).collect();
        let reg_b: Vec<usize> = (nb..nb + self.data_qubits).collect();
        partial_swap_test(&state, &reg_a, &reg_b, nb + self.data_qubits)
    }

    /// Mean `1 − P₀` over prepared joint states.
    pub fn batch_loss(&self, joints: &[&StateVector], theta: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for j in joints {
            sum += 1.0 - self.swap_probability(j, theta)?;
        }
        Ok(sum / joints.len() as f64)
    }

    /// Square roots of the leading-qubit marginal after the ansatz, truncated
    /// to the target length.
    pub fn readout(&self, past_unit: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        self.check_lengths(past_unit, None)?;
        let mut state = amplitude_embed(past_unit, self.spec.n_qubits)?;
        apply_ansatz_in_place(&mut state, &self.spec, theta, &self.gen_register())?;
        let lead: Vec<usize> = (0..self.data_qubits).collect();
        let probs = marginal_probabilities(&state, &lead)?;
        Ok(probs[..self.target_len].iter().map(|p| p.max(0.0).sqrt()).collect())
    }

    fn check_lengths(&self, past: &[f64], target: Option<&[f64]>) -> Result<()> {
        if past.len() != self.past {
            return Err(Error::LengthMismatch {
                left: past.len(),
                right: self.past,
            });
        }
        match target {
            Some(t) if t.len() != self.target_len => Err(Error::LengthMismatch {
                left: t.len(),
                right: self.target_len,
            }),
            _ => Ok(()),
        }
    }
}

impl NormalizedGenerator for FqganCircuit {
    fn generate(&self, past_normalized: &[f64]) -> Result<Vec<f64>> {
        self.readout(past_normalized, &self.theta)
    }
}

pub fn train_fqgan(dataset: &WindowedDataset, config: &TrainConfig) -> Result<ModelArtifact> {
    config.expect_kind(ModelKind::Fqgan)?;
    if dataset.spec.overlapped {
        return Err(Error::invalid("fqgan trains on plain windows; use invertible_fqgan for overlapped ones"));
    }
    train_swap_gan(dataset, config)
}

/// Trains on overlapped windows whose targets repeat the last `f` past values
/// before the `f` future ones.
pub fn train_invertible_fqgan(dataset: &WindowedDataset, config: &TrainConfig) -> Result<ModelArtifact> {
    config.expect_kind(ModelKind::InvertibleFqgan)?;
    let spec = dataset.spec;
    if !spec.overlapped {
        return Err(Error::invalid("invertible_fqgan needs overlapped windows"));
    }
    for pair in &dataset.pairs {
        if pair.target[..spec.future] != pair.past[spec.past - spec.future..] {
            return Err(Error::invalid(format!(
                "window at {} does not repeat its past tail in the target",
                pair.start
            )));
        }
    }
    train_swap_gan(dataset, config)
}

fn train_swap_gan(dataset: &WindowedDataset, config: &TrainConfig) -> Result<ModelArtifact> {
    let spec: WindowSpec = dataset.spec;
    if dataset.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_params = AnsatzSpec::new(ceil_log2(spec.past), config.ansatz_layers)?.n_params();
    let theta: Vec<f64> = (0..n_params).map(|_| rng.random_range(-PI..PI)).collect();
    let mut circuit = FqganCircuit::new(spec.past, spec.target_len(), config.ansatz_layers, theta)?;

    let joints = dataset
        .pairs
        .iter()
        .map(|p| {
            let (past, _) = l2_normalize(&p.past)?;
            let (target, _) = l2_normalize(&p.target)?;
            circuit.joint_state(&past, &target)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut adam = AdamState::new(n_params);
    let mut artifact = ModelArtifact::new(config.kind, spec, config);
    artifact.scaling = dataset.scaling;
    let mut order: Vec<usize> = (0..joints.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut batches) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let states: Vec<&StateVector> = batch.iter().map(|&i| &joints[i]).collect();
            let loss = circuit.batch_loss(&states, &circuit.theta)?;
            check_finite(epoch, "generator loss", loss)?;
            if !(-LOSS_SLACK..=0.5 + LOSS_SLACK).contains(&loss) {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("SWAP-test loss {loss} outside [0, 0.5]"),
                });
            }
            let grad = parameter_shift_gradient(
                |t| circuit.batch_loss(&states, t).unwrap_or(f64::NAN),
                &circuit.theta,
            )
            .map_err(|e| as_divergence(epoch, e))?;
            adam.step(&config.generator_adam, &mut circuit.theta, &grad)
                .map_err(|e| as_divergence(epoch, e))?;
            sum += loss;
            batches += 1;
        }
        artifact.history.push(EpochLoss {
            epoch,
            loss_g: sum / batches as f64,
            loss_d: None,
        });
    }
    artifact.ansatz = Some(circuit.spec);
    artifact.theta = Some(ParamVector::new(circuit.theta)?);
    Ok(artifact)
}
