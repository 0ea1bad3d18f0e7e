//! GAN training engines and the prediction path shared by all model kinds.
//!
//! | kind               | generator                      | discriminator            |
//! |--------------------|--------------------------------|--------------------------|
//! | `simple_gan`       | dense net on past closes       | dense net                |
//! | `gan_ti`           | dense net on indicator windows | dense net                |
//! | `hybrid_qgan`      | angle-encoded VQC, `⟨Z₀⟩`      | dense net                |
//! | `fqgan`            | amplitude-embedded VQC         | SWAP test (no parameters)|
//! | `invertible_fqgan` | as `fqgan`, overlapped targets | SWAP test                |

mod classical;
mod fqgan;
mod hybrid;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataprep::{
    inverse_pipeline, l2_normalize, recover_normalization, Prepared, ScalingState, WindowPair,
    WindowSpec, WindowedDataset, DEFAULT_HP_LAMBDA,
};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::neural::{AdamConfig, DenseNet};
use crate::vqc::{AnsatzSpec, ParamVector, DEFAULT_LAYERS};

pub use classical::{
    build_feature_datasets, train_gan_ti, train_simple_gan, FeatureDataset, FeaturePair,
    DISCRIMINATOR_HIDDEN, GENERATOR_HIDDEN,
};
pub use fqgan::{train_fqgan, train_invertible_fqgan, FqganCircuit};
pub use hybrid::{hybrid_generator_gradient, hybrid_generator_loss, train_hybrid_qgan, HybridGenerator};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SimpleGan,
    GanTi,
    HybridQgan,
    Fqgan,
    InvertibleFqgan,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::SimpleGan,
        ModelKind::GanTi,
        ModelKind::HybridQgan,
        ModelKind::Fqgan,
        ModelKind::InvertibleFqgan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SimpleGan => "simple_gan",
            ModelKind::GanTi => "gan_ti",
            ModelKind::HybridQgan => "hybrid_qgan",
            ModelKind::Fqgan => "fqgan",
            ModelKind::InvertibleFqgan => "invertible_fqgan",
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(
            self,
            ModelKind::HybridQgan | ModelKind::Fqgan | ModelKind::InvertibleFqgan
        )
    }

    /// Whether this kind trains on overlapped (length `2f`) targets.
    pub fn overlapped(self) -> bool {
        self == ModelKind::InvertibleFqgan
    }

    /// Checks that windows `(b, f)` fit this kind's generator.
    pub fn supports(self, b: usize, f: usize, noise_dim: usize) -> Result<()> {
        let spec = window_spec(self, b, f)?;
        match self {
            ModelKind::SimpleGan | ModelKind::GanTi => Ok(()),
            ModelKind::HybridQgan => {
                if f != 1 {
                    return Err(Error::invalid(format!("hybrid_qgan forecasts f = 1, got f = {f}")));
                }
                HybridGenerator::new(b, noise_dim, 1, vec![0.0; b + noise_dim]).map(|_| ())
            }
            ModelKind::Fqgan | ModelKind::InvertibleFqgan => {
                let theta = vec![0.0; crate::vqc::ceil_log2(b)];
                FqganCircuit::new(b, spec.target_len(), 1, theta).map(|_| ())
            }
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub generator_adam: AdamConfig,
    pub discriminator_adam: AdamConfig,
    pub ansatz_layers: usize,
    pub noise_dim: usize,
    pub seed: u64,
    pub hp_lambda: f64,
    pub features: FeatureConfig,
}

impl TrainConfig {
    /// Per-kind defaults: 150 epochs, batch 128, lr 1.6e-4 for the classical and
    /// hybrid engines; 5 epochs, batch 16, lr 0.016 for the SWAP-test engines.
    pub fn for_kind(kind: ModelKind) -> Self {
        let (epochs, batch_size, lr) = match kind {
            ModelKind::Fqgan | ModelKind::InvertibleFqgan => (5, 16, 0.016),
            _ => (150, 128, 0.00016),
        };
        Self {
            kind,
            epochs,
            batch_size,
            generator_adam: AdamConfig::with_lr(lr),
            discriminator_adam: AdamConfig::with_lr(lr),
            ansatz_layers: DEFAULT_LAYERS,
            noise_dim: if kind.is_quantum() { 0 } else { 8 },
            seed: 0,
            hp_lambda: DEFAULT_HP_LAMBDA,
            features: FeatureConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be >= 1"));
        }
        if self.ansatz_layers == 0 {
            return Err(Error::invalid("ansatz_layers must be >= 1"));
        }
        if !self.hp_lambda.is_finite() || self.hp_lambda < 0.0 {
            return Err(Error::invalid(format!("hp_lambda {} must be >= 0", self.hp_lambda)));
        }
        if matches!(self.kind, ModelKind::Fqgan | ModelKind::InvertibleFqgan) && self.noise_dim != 0 {
            return Err(Error::invalid("amplitude-embedded generators take no noise (noise_dim = 0)"));
        }
        self.generator_adam.validate()?;
        self.discriminator_adam.validate()
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        self.validate()?;
        if self.kind != kind {
            return Err(Error::invalid(format!(
                "config is for {} but the {} engine was called",
                self.kind, kind
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss_g: f64,
    /// Absent for engines without a trainable discriminator.
    pub loss_d: Option<f64>,
}

/// Everything `predict` needs, and nothing else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub kind: ModelKind,
    pub window: WindowSpec,
    pub hp_lambda: f64,
    pub noise_dim: usize,
    pub seed: u64,
    pub scaling: Option<ScalingState>,
    pub ansatz: Option<AnsatzSpec>,
    pub theta: Option<ParamVector>,
    pub generator: Option<DenseNet>,
    pub discriminator: Option<DenseNet>,
    pub features: Option<FeatureConfig>,
    pub history: Vec<EpochLoss>,
}

impl ModelArtifact {
    fn new(kind: ModelKind, window: WindowSpec, config: &TrainConfig) -> Self {
        Self {
            format_version: ARTIFACT_VERSION,
            kind,
            window,
            hp_lambda: config.hp_lambda,
            noise_dim: config.noise_dim,
            seed: config.seed,
            scaling: None,
            ansatz: None,
            theta: None,
            generator: None,
            discriminator: None,
            features: None,
            history: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        if a.format_version != ARTIFACT_VERSION {
            return Err(Error::Incompatible(format!(
                "artifact format {} (expected {ARTIFACT_VERSION})",
                a.format_version
            )));
        }
        Ok(a)
    }

    fn missing(&self, what: &str) -> Error {
        Error::Incompatible(format!("{} artifact has no {what}", self.kind))
    }
}

/// Writes `epoch,loss_g,loss_d`.
pub fn write_history_csv<W: Write>(history: &[EpochLoss], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::invalid(format!("writing loss history: {e}"));
    w.write_record(["epoch", "loss_g", "loss_d"]).map_err(err)?;
    for h in history {
        let d = h.loss_d.map(|d| d.to_string()).unwrap_or_default();
        w.write_record([h.epoch.to_string(), h.loss_g.to_string(), d])
            .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::invalid(format!("writing loss history: {e}")))
}

/// Standard-normal noise vector; `dim = 0` yields an empty vector.
pub fn noise_inject<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// One window's forecast. `predicted` and `truth` hold the `f` forecast values,
/// in price units when the dataset carries a scaling state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub window: usize,
    pub predicted: Vec<f64>,
    pub truth: Vec<f64>,
    /// Recovered normalization factor (invertible FQGAN only).
    pub factor: Option<f64>,
    /// Raw normalized generator output (SWAP-test engines only).
    pub normalized: Option<Vec<f64>>,
}

/// Maps a unit-norm past window to the generator's unit-norm target estimate.
pub trait NormalizedGenerator: Sync {
    fn generate(&self, past_normalized: &[f64]) -> Result<Vec<f64>>;
}

impl<F> NormalizedGenerator for F
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    fn generate(&self, past_normalized: &[f64]) -> Result<Vec<f64>> {
        self(past_normalized)
    }
}

fn to_price_units(scaled: &[f64], scaling: Option<&ScalingState>) -> Vec<f64> {
    match scaling {
        Some(s) => s.invert(scaled),
        None => scaled.to_vec(),
    }
}

fn check_window(artifact: &ModelArtifact, spec: &WindowSpec) -> Result<()> {
    let a = &artifact.window;
    if a.past != spec.past || a.future != spec.future || a.overlapped != spec.overlapped {
        return Err(Error::Incompatible(format!(
            "artifact windows (b={}, f={}, overlapped={}) do not match dataset (b={}, f={}, overlapped={})",
            a.past, a.future, a.overlapped, spec.past, spec.future, spec.overlapped
        )));
    }
    Ok(())
}

/// Forecasts every window of `dataset`. Indicator models need
/// [`predict_features`] instead.
pub fn predict(artifact: &ModelArtifact, dataset: &WindowedDataset) -> Result<Vec<Forecast>> {
    check_window(artifact, &dataset.spec)?;
    let scaling = dataset.scaling.as_ref();
    match artifact.kind {
        ModelKind::SimpleGan => {
            let generator = artifact.generator.as_ref().ok_or_else(|| artifact.missing("generator"))?;
            let conds: Vec<Vec<f64>> = dataset.pairs.iter().map(|p| p.past.clone()).collect();
            let outputs = classical::generate(generator, &conds, artifact.noise_dim)?;
            Ok(dataset
                .pairs
                .iter()
                .zip(outputs)
                .enumerate()
                .map(|(i, (pair, out))| Forecast {
                    window: i,
                    predicted: to_price_units(&out, scaling),
                    truth: to_price_units(pair.future_values(&dataset.spec), scaling),
                    factor: None,
                    normalized: None,
                })
                .collect())
        }
        ModelKind::GanTi => Err(Error::Incompatible(
            "gan_ti artifacts predict from indicator windows (predict_features)".into(),
        )),
        ModelKind::HybridQgan => {
            let generator = HybridGenerator::from_artifact(artifact)?;
            dataset
                .pairs
                .par_iter()
                .enumerate()
                .map(|(i, pair)| {
                    let y = generator.predict(&pair.past)?;
                    Ok(Forecast {
                        window: i,
                        predicted: to_price_units(&[y], scaling),
                        truth: to_price_units(pair.future_values(&dataset.spec), scaling),
                        factor: None,
                        normalized: None,
                    })
                })
                .collect()
        }
        ModelKind::Fqgan => {
            let generator = FqganCircuit::from_artifact(artifact)?;
            dataset
                .pairs
                .par_iter()
                .enumerate()
                .map(|(i, pair)| {
                    let y_hat = generator.generate(&pair.normalized_past()?)?;
                    let predicted = match scaling {
                        Some(s) => inverse_pipeline(&y_hat, pair.target_norm, s, artifact.hp_lambda)?,
                        None => y_hat.iter().map(|y| y * pair.target_norm).collect(),
                    };
                    Ok(Forecast {
                        window: i,
                        predicted,
                        truth: to_price_units(&pair.target, scaling),
                        factor: None,
                        normalized: Some(y_hat),
                    })
                })
                .collect()
        }
        ModelKind::InvertibleFqgan => {
            let generator = FqganCircuit::from_artifact(artifact)?;
            predict_invertible(&generator, dataset, artifact.hp_lambda)
        }
    }
}

/// Invertible prediction: the generator emits `2f` normalized values whose
/// first `f` re-predict the known tail of the past window; fitting them to the
/// scaled past recovers the normalization factor without the unknown future.
pub fn predict_invertible<G: NormalizedGenerator>(
    generator: &G,
    dataset: &WindowedDataset,
    hp_lambda: f64,
) -> Result<Vec<Forecast>> {
    let spec = dataset.spec;
    if !spec.overlapped {
        return Err(Error::Incompatible("invertible prediction needs an overlapped dataset".into()));
    }
    let scaling = dataset.scaling.as_ref();
    dataset
        .pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let (past_unit, _) = l2_normalize(&pair.past)?;
            let y_hat = generator.generate(&past_unit)?;
            invertible_forecast(i, pair, &spec, y_hat, scaling, hp_lambda)
        })
        .collect()
}

fn invertible_forecast(
    index: usize,
    pair: &WindowPair,
    spec: &WindowSpec,
    y_hat: Vec<f64>,
    scaling: Option<&ScalingState>,
    hp_lambda: f64,
) -> Result<Forecast> {
    let f = spec.future;
    if y_hat.len() != 2 * f {
        return Err(Error::LengthMismatch {
            left: y_hat.len(),
            right: 2 * f,
        });
    }
    let overlap = &pair.past[spec.past - f..];
    let recovery = recover_normalization(overlap, &y_hat[..f])?;
    let predicted = match scaling {
        Some(s) => inverse_pipeline(&y_hat[f..], recovery.factor, s, hp_lambda)?,
        None => y_hat[f..].iter().map(|y| y * recovery.factor).collect(),
    };
    Ok(Forecast {
        window: index,
        predicted,
        truth: to_price_units(pair.future_values(spec), scaling),
        factor: Some(recovery.factor),
        normalized: Some(y_hat),
    })
}

/// Forecasts for an indicator-window dataset (`gan_ti` artifacts).
pub fn predict_features(artifact: &ModelArtifact, dataset: &FeatureDataset) -> Result<Vec<Forecast>> {
    if artifact.kind != ModelKind::GanTi {
        return Err(Error::Incompatible(format!(
            "{} artifacts predict from price windows",
            artifact.kind
        )));
    }
    check_window(artifact, &dataset.spec)?;
    let generator = artifact.generator.as_ref().ok_or_else(|| artifact.missing("generator"))?;
    let conds: Vec<Vec<f64>> = dataset.pairs.iter().map(|p| p.inputs.clone()).collect();
    let outputs = classical::generate(generator, &conds, artifact.noise_dim)?;
    let scaling = dataset.scaling.as_ref();
    Ok(dataset
        .pairs
        .iter()
        .zip(outputs)
        .enumerate()
        .map(|(i, (pair, out))| Forecast {
            window: i,
            predicted: to_price_units(&out, scaling),
            truth: to_price_units(&pair.target, scaling),
            factor: None,
            normalized: None,
        })
        .collect())
}

/// Train/test inputs for one model kind and window spec.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelData {
    Windows {
        train: WindowedDataset,
        test: WindowedDataset,
    },
    Features {
        train: FeatureDataset,
        test: FeatureDataset,
    },
}

/// Windows (or indicator windows) for `kind` over the smoothed, scaled series.
pub fn build_model_data(
    prepared: &Prepared,
    kind: ModelKind,
    features: &FeatureConfig,
) -> Result<ModelData> {
    if kind == ModelKind::GanTi {
        let (train, test) =
            build_feature_datasets(&prepared.smoothed, prepared.split, &prepared.train.spec, features)?;
        Ok(ModelData::Features { train, test })
    } else {
        Ok(ModelData::Windows {
            train: prepared.train.clone(),
            test: prepared.test.clone(),
        })
    }
}

/// Window spec used by `kind` for past `b` and future `f`.
pub fn window_spec(kind: ModelKind, b: usize, f: usize) -> Result<WindowSpec> {
    if kind.overlapped() {
        WindowSpec::overlapped(b, f)
    } else {
        WindowSpec::new(b, f)
    }
}

/// Dispatches to the engine for `config.kind`.
pub fn train(data: &ModelData, config: &TrainConfig) -> Result<ModelArtifact> {
    match (config.kind, data) {
        (ModelKind::GanTi, ModelData::Features { train, .. }) => train_gan_ti(train, config),
        (ModelKind::SimpleGan, ModelData::Windows { train, .. }) => train_simple_gan(train, config),
        (ModelKind::HybridQgan, ModelData::Windows { train, .. }) => train_hybrid_qgan(train, config),
        (ModelKind::Fqgan, ModelData::Windows { train, .. }) => train_fqgan(train, config),
        (ModelKind::InvertibleFqgan, ModelData::Windows { train, .. }) => {
            train_invertible_fqgan(train, config)
        }
        (kind, _) => Err(Error::invalid(format!("{kind} cannot train on this data layout"))),
    }
}

/// Forecasts for the train and test splits.
pub fn forecast(artifact: &ModelArtifact, data: &ModelData) -> Result<(Vec<Forecast>, Vec<Forecast>)> {
    match data {
        ModelData::Windows { train, test } => Ok((predict(artifact, train)?, predict(artifact, test)?)),
        ModelData::Features { train, test } => Ok((
            predict_features(artifact, train)?,
            predict_features(artifact, test)?,
        )),
    }
}

/// Non-finite values raised inside a training step mean the run diverged.
fn as_divergence(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(detail) => Error::Diverged {
            epoch,
            detail: format!("non-finite {detail}"),
        },
        Error::NonFiniteAngle(angle) => Error::Diverged {
            epoch,
            detail: format!("rotation angle became {angle}"),
        },
        other => other,
    }
}

fn check_finite(epoch: usize, what: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            epoch,
            detail: format!("{what} became {value}"),
        })
    }
}
