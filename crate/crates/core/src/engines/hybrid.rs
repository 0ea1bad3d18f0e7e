//! Hybrid GAN: a variational quantum generator against a dense discriminator.
//!
//! The past window is angle-encoded one value per qubit, the ansatz acts on
//! the whole register and the forecast is `(1 + ⟨Z₀⟩) / 2 ∈ [0, 1]`. Noise,
//! when enabled, is squashed into `[0, 1]` and angle-encoded on extra qubits.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::classical::{discriminator_step, DISCRIMINATOR_HIDDEN};
use super::{as_divergence, check_finite, noise_inject, EpochLoss, ModelArtifact, ModelKind, TrainConfig};
use crate::dataprep::WindowedDataset;
use crate::error::{Error, Result};
use crate::neural::{bce_grad, bce_loss, Activation, AdamState, DenseNet, Matrix};
use crate::qsim::{angle_encode, expectation_z, MAX_QUBITS};
use crate::vqc::{apply_ansatz_in_place, parameter_shift_gradient, AnsatzSpec, ParamVector};

#[derive(Clone, Debug, PartialEq)]
pub struct HybridGenerator {
    pub spec: AnsatzSpec,
    pub theta: Vec<f64>,
    pub past: usize,
    pub noise_dim: usize,
}

impl HybridGenerator {
    pub fn new(past: usize, noise_dim: usize, layers: usize, theta: Vec<f64>) -> Result<Self> {
        let n = past + noise_dim;
        if n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        let spec = AnsatzSpec::new(n, layers)?;
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
            noise_dim,
        })
    }

    pub(super) fn from_artifact(artifact: &ModelArtifact) -> Result<Self> {
        let spec = artifact.ansatz.ok_or_else(|| artifact.missing("ansatz"))?;
        let theta = artifact.theta.as_ref().ok_or_else(|| artifact.missing("parameters"))?;
        Self::new(
            artifact.window.past,
            artifact.noise_dim,
            spec.n_layers,
            theta.as_slice().to_vec(),
        )
    }

    /// Forecast for `past` (scaled, clamped into `[0, 1]`) and raw noise `noise`
    /// under parameters `theta`.
    pub fn readout(&self, theta: &[f64], past: &[f64], noise: &[f64]) -> Result<f64> {
        if past.len() != self.past || noise.len() != self.noise_dim {
            return Err(Error::LengthMismatch {
                left: past.len() + noise.len(),
                right: self.spec.n_qubits,
            });
        }
        let values: Vec<f64> = past
            .iter()
            .map(|v| v.clamp(0.0, 1.0))
            .chain(noise.iter().map(|z| 0.5 * (z.tanh() + 1.0)))
            .collect();
        let mut state = angle_encode(&values)?;
        let register: Vec<usize> = (0..self.spec.n_qubits).collect();
        apply_ansatz_in_place(&mut state, &self.spec, theta, &register)?;
        Ok(0.5 * (1.0 + expectation_z(&state, 0)?))
    }

    /// Zero-noise forecast with the current parameters.
    pub fn predict(&self, past: &[f64]) -> Result<f64> {
        self.readout(&self.theta, past, &vec![0.0; self.noise_dim])
    }
}

fn disc_input(pasts: &[Vec<f64>], outputs: &[f64]) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = pasts
        .iter()
        .zip(outputs)
        .map(|(p, &y)| p.iter().copied().chain(std::iter::once(y)).collect())
        .collect();
    Matrix::from_rows(&rows)
}

fn readouts(gen: &HybridGenerator, theta: &[f64], pasts: &[Vec<f64>], noise: &[Vec<f64>]) -> Result<Vec<f64>> {
    pasts
        .par_iter()
        .zip(noise)
        .map(|(p, z)| gen.readout(theta, p, z))
        .collect()
}

/// Non-saturating generator loss `mean −log D(past ‖ ŷ(θ))` for one batch.
pub fn hybrid_generator_loss(
    gen: &HybridGenerator,
    theta: &[f64],
    discriminator: &DenseNet,
    pasts: &[Vec<f64>],
    noise: &[Vec<f64>],
) -> Result<f64> {
    let y = readouts(gen, theta, pasts, noise)?;
    let d = discriminator.predict(&disc_input(pasts, &y)?)?;
    bce_loss(&d.data, &vec![1.0; d.data.len()])
}

/// Loss and its gradient with respect to `theta`: the discriminator's input
/// gradient at each forecast times that forecast's parameter-shift gradient.
pub fn hybrid_generator_gradient(
    gen: &HybridGenerator,
    theta: &[f64],
    discriminator: &DenseNet,
    pasts: &[Vec<f64>],
    noise: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    let y = readouts(gen, theta, pasts, noise)?;
    let cache = discriminator.forward(&disc_input(pasts, &y)?)?;
    let d = &cache.output().data;
    let ones = vec![1.0; d.len()];
    let loss = bce_loss(d, &ones)?;
    let grads = discriminator.backward(
        &cache,
        &Matrix {
            rows: d.len(),
            cols: 1,
            data: bce_grad(d, &ones)?,
        },
    )?;
    let mut total = vec![0.0; theta.len()];
    for (j, (p, z)) in pasts.iter().zip(noise).enumerate() {
        let dl_dy = grads.input.get(j, gen.past);
        let dy = parameter_shift_gradient(|t| gen.readout(t, p, z).unwrap_or(f64::NAN), theta)?;
        total.iter_mut().zip(dy).for_each(|(g, d)| *g += dl_dy * d);
    }
    Ok((loss, total))
}

pub fn train_hybrid_qgan(dataset: &WindowedDataset, config: &TrainConfig) -> Result<ModelArtifact> {
    config.expect_kind(ModelKind::HybridQgan)?;
    let spec = dataset.spec;
    if spec.future != 1 || spec.overlapped {
        return Err(Error::invalid(format!(
            "the hybrid generator reads out one value per window (f = 1), got f = {}",
            spec.future
        )));
    }
    if dataset.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_params = AnsatzSpec::new(spec.past + config.noise_dim, config.ansatz_layers)?.n_params();
    let theta: Vec<f64> = (0..n_params).map(|_| rng.random_range(-PI..PI)).collect();
    let mut gen = HybridGenerator::new(spec.past, config.noise_dim, config.ansatz_layers, theta)?;
    let mut discriminator = DenseNet::new(
        &[spec.past + 1, DISCRIMINATOR_HIDDEN[0], DISCRIMINATOR_HIDDEN[1], 1],
        Activation::LeakyRelu,
        Activation::Sigmoid,
        &mut rng,
    )?;
    let mut adam = AdamState::new(n_params);
    let mut artifact = ModelArtifact::new(ModelKind::HybridQgan, spec, config);
    artifact.scaling = dataset.scaling;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut sum_g, mut sum_d, mut batches) = (0.0, 0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let pasts: Vec<Vec<f64>> = batch.iter().map(|&i| dataset.pairs[i].past.clone()).collect();
            let real: Vec<f64> = batch.iter().map(|&i| dataset.pairs[i].target[0]).collect();
            let noise: Vec<Vec<f64>> = batch.iter().map(|_| noise_inject(&mut rng, config.noise_dim)).collect();

            let mut step = || -> Result<(f64, f64)> {
                let fake = readouts(&gen, &gen.theta, &pasts, &noise)?;
                let loss_d = discriminator_step(
                    &mut discriminator,
                    &disc_input(&pasts, &real)?,
                    &disc_input(&pasts, &fake)?,
                    &config.discriminator_adam,
                )?;
                let (loss_g, grad) = hybrid_generator_gradient(&gen, &gen.theta, &discriminator, &pasts, &noise)?;
                adam.step(&config.generator_adam, &mut gen.theta, &grad)?;
                Ok((loss_g, loss_d))
            };
            let (loss_g, loss_d) = step().map_err(|e| as_divergence(epoch, e))?;

            check_finite(epoch, "discriminator loss", loss_d)?;
            check_finite(epoch, "generator loss", loss_g)?;
            sum_g += loss_g;
            sum_d += loss_d;
            batches += 1;
        }
        artifact.history.push(EpochLoss {
            epoch,
            loss_g: sum_g / batches as f64,
            loss_d: Some(sum_d / batches as f64),
        });
    }
    artifact.ansatz = Some(gen.spec);
    artifact.theta = Some(ParamVector::new(gen.theta)?);
    artifact.discriminator = Some(discriminator);
    Ok(artifact)
}
