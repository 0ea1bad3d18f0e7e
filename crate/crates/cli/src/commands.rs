//! One function per subcommand. Each returns the paths it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qganf_core::dataprep::{load_csv, prepare};
use qganf_core::engines::{build_model_data, forecast, train, write_history_csv, Forecast};
use qganf_core::eval::{evaluate_predictions, window_sweep, write_sweep_csv, CellFailure, SweepReport};
use qganf_core::features::{feature_matrix, FeatureConfig};
use qganf_core::vqc::{resource_report, ResourceReport, DEPTH_MODEL};
use qganf_core::{MetricsReport, ModelArtifact, ModelKind, Prepared, ScalingState, WindowSpec};

use crate::config::ExperimentConfig;
use crate::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::BadFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(qganf_core::Error::from)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn load_dataset(config: &ExperimentConfig) -> Result<Prepared, CliError> {
    let path = config.dataset_path();
    if !path.exists() {
        return Err(CliError::MissingDataset(path));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadFile {
        path,
        message: e.to_string(),
    })
}

fn load_model(config: &ExperimentConfig) -> Result<ModelArtifact, CliError> {
    let path = config.model_path();
    if !path.exists() {
        return Err(CliError::MissingModel(path));
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(ModelArtifact::from_json(&text)?)
}

#[derive(Serialize)]
struct Provenance {
    input: String,
    rows: usize,
    first_date: String,
    last_date: String,
    hp_lambda: f64,
    split_ratio: f64,
    train_rows: usize,
    test_rows: usize,
    window: WindowSpec,
    train_pairs: usize,
    test_pairs: usize,
    train_out_of_range: usize,
    test_out_of_range: usize,
    scaling: ScalingState,
}

/// Smooths, splits, scales and windows the input series.
pub fn cmd_prepare(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let input = config.require_input()?;
    let spec = config.window_spec()?;
    let series = load_csv(input)?;
    let prepared = prepare(&series, config.hp_lambda, config.split_ratio, &spec)?;
    let date = |i: usize| prepared.dates.get(i).map(|d| d.to_string()).unwrap_or_default();
    let provenance = Provenance {
        input: input.display().to_string(),
        rows: prepared.raw.len(),
        first_date: date(0),
        last_date: date(prepared.raw.len().saturating_sub(1)),
        hp_lambda: prepared.hp_lambda,
        split_ratio: prepared.split_ratio,
        train_rows: prepared.split,
        test_rows: prepared.raw.len() - prepared.split,
        window: spec,
        train_pairs: prepared.train.len(),
        test_pairs: prepared.test.len(),
        train_out_of_range: prepared.train.out_of_range,
        test_out_of_range: prepared.test.out_of_range,
        scaling: prepared.scaling,
    };
    Ok(vec![
        write_json(&config.dataset_path(), &prepared)?,
        write_json(&config.out.join("provenance.json"), &provenance)?,
    ])
}

/// Indicator matrix of the smoothed series.
pub fn cmd_features(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let prepared = load_dataset(config)?;
    let matrix = feature_matrix(&prepared.smoothed, &FeatureConfig::default())?;
    let mut buf = Vec::new();
    matrix.write_csv(&mut buf, Some(&prepared.dates))?;
    Ok(vec![write_file(&config.out.join("features.csv"), &buf)?])
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let kind = config.require_kind()?;
    let prepared = load_dataset(config)?;
    let spec = prepared.train.spec;
    let requested = config.past.zip(config.future);
    if requested.is_some_and(|w| w != (spec.past, spec.future)) || spec.overlapped != kind.overlapped() {
        return Err(CliError::Core(qganf_core::Error::Incompatible(format!(
            "dataset has b={}, f={}, overlapped={}; rerun `qganf prepare` with kind = {kind} and the wanted b, f",
            spec.past, spec.future, spec.overlapped
        ))));
    }
    let mut train_config = config.train_config(kind);
    train_config.hp_lambda = prepared.hp_lambda;
    kind.supports(spec.past, spec.future, train_config.noise_dim)?;
    let data = build_model_data(&prepared, kind, &train_config.features)?;
    let artifact = train(&data, &train_config)?;
    let mut history = Vec::new();
    write_history_csv(&artifact.history, &mut history)?;
    let mut model = artifact.to_json()?;
    model.push('\n');
    Ok(vec![
        write_file(&config.model_path(), model.as_bytes())?,
        write_file(&config.out.join("loss_history.csv"), &history)?,
    ])
}

fn forecast_rows<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    split: &str,
    forecasts: &[Forecast],
    with_factor: bool,
) -> csv::Result<()> {
    for fc in forecasts {
        for (h, (p, t)) in fc.predicted.iter().zip(&fc.truth).enumerate() {
            let mut row = vec![split.to_string(), fc.window.to_string(), h.to_string(), p.to_string(), t.to_string()];
            if with_factor {
                row.push(fc.factor.map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
    }
    Ok(())
}

/// Writes `split,window,horizon,predicted,truth` rows for both splits, plus a
/// `factor` column for invertible artifacts.
pub fn cmd_predict(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let artifact = load_model(config)?;
    let prepared = load_dataset(config)?;
    let features = artifact.features.clone().unwrap_or_default();
    let data = build_model_data(&prepared, artifact.kind, &features)?;
    let (train_fc, test_fc) = forecast(&artifact, &data)?;
    let path = config.predictions_path();
    let with_factor = artifact.kind == ModelKind::InvertibleFqgan;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["split", "window", "horizon", "predicted", "truth"];
    if with_factor {
        header.push("factor");
    }
    w.write_record(&header).map_err(csv_err(&path))?;
    forecast_rows(&mut w, "train", &train_fc, with_factor).map_err(csv_err(&path))?;
    forecast_rows(&mut w, "test", &test_fc, with_factor).map_err(csv_err(&path))?;
    let bytes = w.into_inner().map_err(|e| CliError::BadFile {
        path: path.clone(),
        message: e.to_string(),
    })?;
    Ok(vec![write_file(&path, &bytes)?])
}

#[derive(Deserialize)]
struct PredictionRow {
    split: String,
    window: usize,
    predicted: f64,
    truth: Option<f64>,
}

/// Predicted and true values of one window.
type WindowValues = (Vec<f64>, Vec<f64>);

/// Metrics per split from a predictions file.
pub fn cmd_evaluate(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let path = config.predictions_path();
    if !path.exists() {
        return Err(CliError::BadFile {
            path,
            message: "predictions file not found; run `qganf predict` first".into(),
        });
    }
    let mut reader = csv::Reader::from_path(&path).map_err(csv_err(&path))?;
    let headers = reader.headers().map_err(csv_err(&path))?;
    if !headers.iter().any(|h| h == "truth") {
        return Err(CliError::BadFile {
            path,
            message: "no truth column".into(),
        });
    }
    let mut grouped: BTreeMap<String, BTreeMap<usize, WindowValues>> = BTreeMap::new();
    for (i, row) in reader.deserialize::<PredictionRow>().enumerate() {
        let row = row.map_err(csv_err(&path))?;
        let truth = row.truth.ok_or_else(|| CliError::BadFile {
            path: path.clone(),
            message: format!("row {} has no truth value", i + 2),
        })?;
        let cell = grouped.entry(row.split).or_default().entry(row.window).or_default();
        cell.0.push(row.predicted);
        cell.1.push(truth);
    }
    let mut metrics: BTreeMap<String, MetricsReport> = BTreeMap::new();
    for (split, windows) in grouped {
        let (pred, truth): (Vec<Vec<f64>>, Vec<Vec<f64>>) = windows.into_values().unzip();
        metrics.insert(split, evaluate_predictions(&pred, &truth)?);
    }
    Ok(vec![write_json(&config.out.join("metrics.json"), &metrics)?])
}

/// Kinds × windows grid; failed cells go to `sweep_failures.csv`.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let input = config.require_input()?;
    if config.windows.is_empty() {
        return Err(CliError::Config("sweep needs a non-empty windows list".into()));
    }
    let kinds = if config.kinds.is_empty() {
        vec![config.require_kind()?]
    } else {
        config.kinds.clone()
    };
    let series = load_csv(input)?;
    let report: SweepReport = window_sweep(
        &series,
        &kinds,
        &config.windows,
        config.seed,
        config.split_ratio,
        |kind| config.train_config(kind),
    )?;
    let mut table = Vec::new();
    write_sweep_csv(&report, &mut table)?;
    let failures_path = config.out.join("sweep_failures.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "b", "f", "reason"]).map_err(csv_err(&failures_path))?;
    for CellFailure { kind, b, f, reason } in &report.failures {
        w.write_record([kind.name(), &b.to_string(), &f.to_string(), reason])
            .map_err(csv_err(&failures_path))?;
    }
    let failures = w.into_inner().map_err(|e| CliError::BadFile {
        path: failures_path.clone(),
        message: e.to_string(),
    })?;
    Ok(vec![
        write_file(&config.out.join("sweep.csv"), &table)?,
        write_json(&config.out.join("sweep.json"), &report)?,
        write_file(&failures_path, &failures)?,
    ])
}

#[derive(Serialize)]
struct ResourceTable<'a> {
    depth_model: &'a str,
    rows: &'a [ResourceReport],
}

/// Qubits, depth and trainable parameters per window.
pub fn cmd_resources(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let rows = config
        .window_list()?
        .into_iter()
        .map(|(b, f)| resource_report(b, f, config.ansatz_layers))
        .collect::<Result<Vec<_>, _>>()?;
    let path = config.out.join("resources.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(csv_err(&path))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::BadFile {
        path: path.clone(),
        message: e.to_string(),
    })?;
    Ok(vec![
        write_file(&path, &bytes)?,
        write_json(
            &config.out.join("resources.json"),
            &ResourceTable {
                depth_model: DEPTH_MODEL,
                rows: &rows,
            },
        )?,
    ])
}
