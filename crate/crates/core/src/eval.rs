//! Forecast metrics and window-size sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataprep::{prepare, PriceSeries};
use crate::engines::{build_model_data, forecast, train, window_spec, Forecast, ModelKind, TrainConfig};
use crate::error::{Error, Result};

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if pred.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Coefficient of determination. Undefined (an error) for constant truth.
pub fn r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("R² is undefined for constant truth".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_pairs: usize,
    pub n_values: usize,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the truth is constant.
    pub r2: Option<f64>,
}

/// Metrics over all forecast values of all windows, flattened.
pub fn evaluate_predictions(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: t.len(),
            });
        }
    }
    let p: Vec<f64> = pred.concat();
    let t: Vec<f64> = truth.concat();
    let r2 = match r2(&p, &t) {
        Ok(v) => Some(v),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        n_pairs: pred.len(),
        n_values: p.len(),
        rmse: rmse(&p, &t)?,
        mae: mae(&p, &t)?,
        r2,
    })
}

pub fn evaluate_forecasts(forecasts: &[Forecast]) -> Result<MetricsReport> {
    let pred: Vec<Vec<f64>> = forecasts.iter().map(|f| f.predicted.clone()).collect();
    let truth: Vec<Vec<f64>> = forecasts.iter().map(|f| f.truth.clone()).collect();
    evaluate_predictions(&pred, &truth)
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one sweep cell, independent of scheduling order.
pub fn cell_seed(seed: u64, b: usize, f: usize, kind: ModelKind) -> u64 {
    let kind_index = ModelKind::ALL.iter().position(|&k| k == kind).unwrap_or(0) as u64;
    [b as u64, f as u64, kind_index]
        .into_iter()
        .fold(mix(seed), |acc, v| mix(acc ^ v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub kind: ModelKind,
    pub b: usize,
    pub f: usize,
    pub seed: u64,
    pub train: MetricsReport,
    pub test: MetricsReport,
    pub final_loss_g: Option<f64>,
}

/// Prepares data for `(b, f)`, trains `config.kind` on the training split and
/// scores forecasts on both splits against the smoothed prices.
pub fn run_cell(
    series: &PriceSeries,
    b: usize,
    f: usize,
    config: &TrainConfig,
    split_ratio: f64,
) -> Result<CellResult> {
    config.kind.supports(b, f, config.noise_dim)?;
    let spec = window_spec(config.kind, b, f)?;
    let prepared = prepare(series, config.hp_lambda, split_ratio, &spec)?;
    let data = build_model_data(&prepared, config.kind, &config.features)?;
    let artifact = train(&data, config)?;
    let (train_fc, test_fc) = forecast(&artifact, &data)?;
    Ok(CellResult {
        kind: config.kind,
        b,
        f,
        seed: config.seed,
        train: evaluate_forecasts(&train_fc)?,
        test: evaluate_forecasts(&test_fc)?,
        final_loss_g: artifact.history.last().map(|h| h.loss_g),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub kind: ModelKind,
    pub b: usize,
    pub f: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

/// Runs every `(kind, b, f)` cell in parallel. `config_for` supplies each
/// kind's training configuration; its seed is replaced by the cell seed.
/// Cells that are unsupported or fail are recorded in `failures`. Both lists
/// come back sorted by kind, then `b`, then `f`.
pub fn window_sweep<C>(
    series: &PriceSeries,
    kinds: &[ModelKind],
    windows: &[(usize, usize)],
    seed: u64,
    split_ratio: f64,
    config_for: C,
) -> Result<SweepReport>
where
    C: Fn(ModelKind) -> TrainConfig + Sync,
{
    if kinds.is_empty() || windows.is_empty() {
        return Err(Error::invalid("a sweep needs at least one kind and one window"));
    }
    let jobs: Vec<(ModelKind, usize, usize)> = kinds
        .iter()
        .flat_map(|&k| windows.iter().map(move |&(b, f)| (k, b, f)))
        .collect();
    let outcomes: Vec<_> = jobs
        .into_par_iter()
        .map(|(kind, b, f)| {
            let mut config = config_for(kind);
            config.kind = kind;
            config.seed = cell_seed(seed, b, f, kind);
            run_cell(series, b, f, &config, split_ratio).map_err(|e| CellFailure {
                kind,
                b,
                f,
                reason: e.to_string(),
            })
        })
        .collect();
    let (mut cells, mut failures) = (Vec::new(), Vec::new());
    for o in outcomes {
        match o {
            Ok(c) => cells.push(c),
            Err(f) => failures.push(f),
        }
    }
    cells.sort_by_key(|c| (c.kind, c.b, c.f));
    failures.sort_by_key(|c| (c.kind, c.b, c.f));
    Ok(SweepReport { seed, cells, failures })
}

/// Writes `kind,b,f,split,n_pairs,rmse,mae,r2`, one row per cell and split.
pub fn write_sweep_csv<W: Write>(report: &SweepReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::invalid(format!("writing sweep table: {e}"));
    w.write_record(["kind", "b", "f", "split", "n_pairs", "rmse", "mae", "r2"])
        .map_err(err)?;
    for c in &report.cells {
        for (split, m) in [("train", &c.train), ("test", &c.test)] {
            w.write_record([
                c.kind.name().to_string(),
                c.b.to_string(),
                c.f.to_string(),
                split.to_string(),
                m.n_pairs.to_string(),
                m.rmse.to_string(),
                m.mae.to_string(),
                m.r2.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::invalid(format!("writing sweep table: {e}")))
}
