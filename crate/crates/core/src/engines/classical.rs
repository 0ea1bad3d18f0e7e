//! Dense-network GANs: the plain conditional GAN and the technical-indicator variant.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{as_divergence, check_finite, noise_inject, EpochLoss, ModelArtifact, ModelKind, TrainConfig};
use crate::dataprep::{minmax_fit, ScalingState, WindowSpec, WindowedDataset};
use crate::error::{Error, Result};
use crate::features::{feature_matrix, FeatureConfig};
use crate::neural::{bce_grad, bce_loss, Activation, AdamConfig, DenseNet, Matrix};

pub const GENERATOR_HIDDEN: [usize; 2] = [64, 64];
pub const DISCRIMINATOR_HIDDEN: [usize; 2] = [64, 32];

/// Indicator windows: each input row is `b` consecutive feature rows flattened
/// row-major, paired with the scaled close prices it conditions on and forecasts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub spec: WindowSpec,
    pub n_features: usize,
    /// Scaling of the close column, for converting forecasts to price units.
    pub scaling: Option<ScalingState>,
    pub pairs: Vec<FeaturePair>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    /// Index of the first past point in the source series.
    pub start: usize,
    pub inputs: Vec<f64>,
    pub past: Vec<f64>,
    pub target: Vec<f64>,
}

/// Builds train and test indicator datasets from a price series. Rows before
/// `split` (in source indices) are training rows; every column is min-max
/// scaled with training statistics.
pub fn build_feature_datasets(
    prices: &[f64],
    split: usize,
    spec: &WindowSpec,
    config: &FeatureConfig,
) -> Result<(FeatureDataset, FeatureDataset)> {
    let spec = spec.validated()?;
    if spec.overlapped {
        return Err(Error::invalid("indicator windows are not overlapped"));
    }
    let fm = feature_matrix(prices, config)?;
    if split <= fm.start || split >= prices.len() {
        return Err(Error::invalid(format!(
            "split {split} leaves no training rows after the {}-row warm-up",
            fm.start
        )));
    }
    let train_rows = split - fm.start;
    let scalings = fm
        .columns
        .iter()
        .zip(&fm.names)
        .map(|(c, name)| {
            minmax_fit(&c[..train_rows])
                .map_err(|e| Error::Degenerate(format!("feature {name}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let scaled: Vec<Vec<f64>> = fm
        .columns
        .iter()
        .zip(&scalings)
        .map(|(c, s)| s.apply(c))
        .collect();
    let n_features = fm.n_cols();
    let close = &scaled[0];

    let build = |from: usize, to: usize| -> Result<FeatureDataset> {
        let n = to - from;
        let count = spec.count(n);
        if count == 0 {
            return Err(Error::TooShort {
                needed: spec.past + spec.future,
                got: n,
            });
        }
        let pairs = (0..count)
            .map(|k| {
                let t = from + k * spec.stride;
                let mut inputs = Vec::with_capacity(spec.past * n_features);
                for r in t..t + spec.past {
                    inputs.extend(scaled.iter().map(|c| c[r]));
                }
                FeaturePair {
                    start: fm.start + t,
                    inputs,
                    past: close[t..t + spec.past].to_vec(),
                    target: close[t + spec.past..t + spec.past + spec.future].to_vec(),
                }
            })
            .collect();
        Ok(FeatureDataset {
            spec,
            n_features,
            scaling: Some(scalings[0]),
            pairs,
        })
    };
    Ok((build(0, train_rows)?, build(train_rows, fm.n_rows())?))
}

/// Training samples for the shared adversarial loop.
struct Samples {
    /// Generator conditioning input.
    gen_cond: Vec<Vec<f64>>,
    /// Discriminator conditioning input, concatenated before the real or fake target.
    disc_cond: Vec<Vec<f64>>,
    target: Vec<Vec<f64>>,
}

pub fn train_simple_gan(dataset: &WindowedDataset, config: &TrainConfig) -> Result<ModelArtifact> {
    config.expect_kind(ModelKind::SimpleGan)?;
    let spec = dataset.spec;
    let samples = Samples {
        gen_cond: dataset.pairs.iter().map(|p| p.past.clone()).collect(),
        disc_cond: dataset.pairs.iter().map(|p| p.past.clone()).collect(),
        target: dataset
            .pairs
            .iter()
            .map(|p| p.future_values(&spec).to_vec())
            .collect(),
    };
    let mut artifact = ModelArtifact::new(ModelKind::SimpleGan, spec, config);
    artifact.scaling = dataset.scaling;
    train_adversarial(samples, config, &mut artifact)?;
    Ok(artifact)
}

/// Indicator GAN: the generator sees `b × n_features` indicator values, the
/// discriminator judges the past closes followed by a real or generated target.
pub fn train_gan_ti(dataset: &FeatureDataset, config: &TrainConfig) -> Result<ModelArtifact> {
    config.expect_kind(ModelKind::GanTi)?;
    let samples = Samples {
        gen_cond: dataset.pairs.iter().map(|p| p.inputs.clone()).collect(),
        disc_cond: dataset.pairs.iter().map(|p| p.past.clone()).collect(),
        target: dataset.pairs.iter().map(|p| p.target.clone()).collect(),
    };
    let mut artifact = ModelArtifact::new(ModelKind::GanTi, dataset.spec, config);
    artifact.scaling = dataset.scaling;
    artifact.features = Some(config.features.clone());
    train_adversarial(samples, config, &mut artifact)?;
    Ok(artifact)
}

fn concat_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.iter().chain(y).copied().collect())
        .collect();
    Matrix::from_rows(&rows)
}

fn split_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows).map(|r| m.row(r).to_vec()).collect()
}

fn train_adversarial(samples: Samples, config: &TrainConfig, artifact: &mut ModelArtifact) -> Result<()> {
    let n = samples.target.len();
    if n == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let cond_w = samples.gen_cond[0].len();
    let disc_w = samples.disc_cond[0].len();
    let f = samples.target[0].len();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gen_sizes = [cond_w + config.noise_dim, GENERATOR_HIDDEN[0], GENERATOR_HIDDEN[1], f];
    let disc_sizes = [disc_w + f, DISCRIMINATOR_HIDDEN[0], DISCRIMINATOR_HIDDEN[1], 1];
    let mut generator = DenseNet::new(&gen_sizes, Activation::LeakyRelu, Activation::Linear, &mut rng)?;
    let mut discriminator =
        DenseNet::new(&disc_sizes, Activation::LeakyRelu, Activation::Sigmoid, &mut rng)?;

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut sum_g, mut sum_d, mut batches) = (0.0, 0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let pick = |v: &[Vec<f64>]| -> Vec<Vec<f64>> { batch.iter().map(|&i| v[i].clone()).collect() };
            let (cond, dcond, real) = (pick(&samples.gen_cond), pick(&samples.disc_cond), pick(&samples.target));
            let noise: Vec<Vec<f64>> = batch.iter().map(|_| noise_inject(&mut rng, config.noise_dim)).collect();

            let mut step = || -> Result<(f64, f64)> {
                let g_cache = generator.forward(&concat_rows(&cond, &noise)?)?;
                let fake = split_rows(g_cache.output());

                let loss_d = discriminator_step(
                    &mut discriminator,
                    &concat_rows(&dcond, &real)?,
                    &concat_rows(&dcond, &fake)?,
                    &config.discriminator_adam,
                )?;

                // Non-saturating generator loss −log D(fake), through the updated discriminator.
                let d_cache = discriminator.forward(&concat_rows(&dcond, &fake)?)?;
                let d_fake = &d_cache.output().data;
                let ones = vec![1.0; d_fake.len()];
                let loss_g = bce_loss(d_fake, &ones)?;
                let d_grads = discriminator.backward(
                    &d_cache,
                    &Matrix {
                        rows: d_fake.len(),
                        cols: 1,
                        data: bce_grad(d_fake, &ones)?,
                    },
                )?;
                let mut grad_fake = Matrix::zeros(batch.len(), f);
                for r in 0..batch.len() {
                    grad_fake.row_mut(r).copy_from_slice(&d_grads.input.row(r)[disc_w..]);
                }
                let g_grads = generator.backward(&g_cache, &grad_fake)?;
                generator.adam_step(&g_grads, &config.generator_adam)?;
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
    artifact.generator = Some(generator);
    artifact.discriminator = Some(discriminator);
    Ok(())
}

/// One BCE step on a real batch (label 1) and a fake batch (label 0). Returns
/// the summed loss before the update.
pub(super) fn discriminator_step(
    discriminator: &mut DenseNet,
    real: &Matrix,
    fake: &Matrix,
    adam: &AdamConfig,
) -> Result<f64> {
    let r_cache = discriminator.forward(real)?;
    let f_cache = discriminator.forward(fake)?;
    let (d_real, d_fake) = (&r_cache.output().data, &f_cache.output().data);
    let (ones, zeros) = (vec![1.0; d_real.len()], vec![0.0; d_fake.len()]);
    let loss = bce_loss(d_real, &ones)? + bce_loss(d_fake, &zeros)?;
    let column = |data: Vec<f64>| Matrix {
        rows: data.len(),
        cols: 1,
        data,
    };
    let mut grads = discriminator.backward(&r_cache, &column(bce_grad(d_real, &ones)?))?;
    grads.add(&discriminator.backward(&f_cache, &column(bce_grad(d_fake, &zeros)?))?)?;
    discriminator.adam_step(&grads, adam)?;
    Ok(loss)
}

/// Generator outputs for each conditioning row, with zero noise.
pub(super) fn generate(generator: &DenseNet, conds: &[Vec<f64>], noise_dim: usize) -> Result<Vec<Vec<f64>>> {
    if conds.is_empty() {
        return Ok(Vec::new());
    }
    let zeros = vec![vec![0.0; noise_dim]; conds.len()];
    Ok(split_rows(&generator.predict(&concat_rows(conds, &zeros)?)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::make_windows;

    #[test]
    fn feature_dataset_shapes() {
        let prices: Vec<f64> = (0..200).map(|t| 100.0 + (t as f64 * 0.1).sin() * 5.0 + t as f64 * 0.2).collect();
        let spec = WindowSpec::new(4, 2).unwrap();
        let (train, test) = build_feature_datasets(&prices, 160, &spec, &FeatureConfig::default()).unwrap();
        assert_eq!(train.n_features, 8);
        assert_eq!(train.pairs[0].inputs.len(), 32);
        assert_eq!(train.pairs[0].start, 20);
        assert_eq!(train.pairs.len(), spec.count(140));
        assert_eq!(test.pairs.len(), spec.count(40));
        assert_eq!(test.pairs[0].start, 160);
        // First feature column of each row is the scaled close.
        let p = &train.pairs[3];
        for (k, &c) in p.past.iter().enumerate() {
            assert_eq!(p.inputs[k * 8], c);
        }
        assert!(build_feature_datasets(&prices, 10, &spec, &FeatureConfig::default()).is_err());
    }

    #[test]
    fn discriminator_separates_a_frozen_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let generator = DenseNet::new(&[3, 8, 1], Activation::LeakyRelu, Activation::Linear, &mut rng).unwrap();
        let mut disc = DenseNet::new(&[3, 64, 32, 1], Activation::LeakyRelu, Activation::Sigmoid, &mut rng).unwrap();
        let pasts: Vec<Vec<f64>> = (0..32).map(|i| vec![0.1 + 0.02 * i as f64, 0.3]).collect();
        let noise = vec![vec![0.0]; 32];
        let fake = split_rows(&generator.predict(&concat_rows(&pasts, &noise).unwrap()).unwrap());
        let real = vec![vec![5.0]; 32];
        let (real_in, fake_in) = (concat_rows(&pasts, &real).unwrap(), concat_rows(&pasts, &fake).unwrap());
        let adam = AdamConfig::with_lr(0.01);
        let mut loss = f64::INFINITY;
        for _ in 0..50 {
            loss = discriminator_step(&mut disc, &real_in, &fake_in, &adam).unwrap() / 2.0;
        }
        assert!(loss < 0.5, "{loss}");
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let ds = make_windows(&[0.5; 12], &WindowSpec::new(2, 1).unwrap()).unwrap();
        let cfg = TrainConfig::for_kind(ModelKind::GanTi);
        assert!(train_simple_gan(&ds, &cfg).is_err());
    }
}
