//! Price ingestion and the forecasting data pipeline.
//!
//! Forward direction: adjusted close → Hodrick–Prescott trend → chronological
//! train/test split → min-max scaling fitted on the training segment → sliding
//! windows, each carrying its own L2 norm so it can be amplitude-embedded and
//! later mapped back to price units.

use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HP_LAMBDA: f64 = 1600.0;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;
pub const MIN_SERIES_LEN: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    /// Validates and sorts by date.
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::LengthMismatch {
                left: dates.len(),
                right: prices.len(),
            });
        }
        if let Some(p) = prices.iter().find(|p| !p.is_finite() || **p <= 0.0) {
            return Err(Error::invalid(format!("price {p} must be finite and positive")));
        }
        let mut rows: Vec<_> = dates.into_iter().zip(prices).collect();
        rows.sort_by_key(|r| r.0);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(format!("duplicate date {}", w[0].0)));
        }
        let (dates, prices) = rows.into_iter().unzip();
        Ok(Self { dates, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn with_prices(&self, prices: Vec<f64>) -> Result<Self> {
        Self::new(self.dates.clone(), prices)
    }

    fn split_at(&self, at: usize) -> (Self, Self) {
        let head = Self {
            dates: self.dates[..at].to_vec(),
            prices: self.prices[..at].to_vec(),
        };
        let tail = Self {
            dates: self.dates[at..].to_vec(),
            prices: self.prices[at..].to_vec(),
        };
        (head, tail)
    }
}

/// Reads a `date,adj_close` CSV with ISO-8601 dates.
pub fn load_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(file, path)
}

pub fn parse_csv(reader: impl Read, source: &Path) -> Result<PriceSeries> {
    let fail = |line: u64, message: String| Error::Csv {
        path: source.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| fail(1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["date", "adj_close"] {
        let got = headers.iter().collect::<Vec<_>>().join(",");
        return Err(fail(1, format!("expected header \"date,adj_close\", got \"{got}\"")));
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            fail(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(fail(line, format!("expected 2 fields, got {}", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| fail(line, format!("bad date {:?}: {e}", &record[0])))?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| fail(line, format!("bad price {:?}", &record[1])))?;
        if !price.is_finite() || price <= 0.0 {
            return Err(fail(line, format!("price {price} must be finite and positive")));
        }
        rows.push((date, price, line));
    }

    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        let line = w[0].2.max(w[1].2);
        return Err(fail(line, format!("duplicate date {}", w[0].0)));
    }
    let (dates, prices) = rows.into_iter().map(|(d, p, _)| (d, p)).unzip();
    Ok(PriceSeries { dates, prices })
}

/// Hodrick–Prescott trend: minimizes `Σ(y − τ)² + λ Σ(Δ²τ)²` by solving the
/// pentadiagonal system `(I + λ DᵀD) τ = y`.
pub fn hp_filter(prices: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("HP lambda {lambda} must be finite and >= 0")));
    }
    if let Some(p) = prices.iter().find(|p| !p.is_finite()) {
        return Err(Error::NonFinite(format!("HP input {p}")));
    }
    if lambda == 0.0 {
        return Ok(prices.to_vec());
    }
    let n = prices.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }

    // Bands of the symmetric matrix I + λDᵀD, accumulated row by row of D.
    let mut diag = vec![1.0; n];
    let mut off1 = vec![0.0; n - 1];
    let mut off2 = vec![0.0; n - 2];
    const STENCIL: [f64; 3] = [1.0, -2.0, 1.0];
    for k in 0..n - 2 {
        for i in 0..3 {
            diag[k + i] += lambda * STENCIL[i] * STENCIL[i];
        }
        off1[k] += lambda * STENCIL[0] * STENCIL[1];
        off1[k + 1] += lambda * STENCIL[1] * STENCIL[2];
        off2[k] += lambda * STENCIL[0] * STENCIL[2];
    }
    Ok(solve_spd_pentadiagonal(&diag, &off1, &off2, prices))
}

/// LDLᵀ solve of a symmetric positive-definite matrix with bandwidth 2.
fn solve_spd_pentadiagonal(diag: &[f64], off1: &[f64], off2: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // l1[i] = L[i+1][i], l2[i] = L[i+2][i]
    let mut d = vec![0.0; n];
    let mut l1 = vec![0.0; n.saturating_sub(1)];
    let mut l2 = vec![0.0; n.saturating_sub(2)];
    for i in 0..n {
        let mut di = diag[i];
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        }
        d[i] = di;
        if i + 1 < n {
            let mut v = off1[i];
            if i >= 1 {
                v -= l2[i - 1] * l1[i - 1] * d[i - 1];
            }
            l1[i] = v / di;
        }
        if i + 2 < n {
            l2[i] = off2[i] / di;
        }
    }

    let mut x = rhs.to_vec();
    for i in 0..n {
        if i >= 1 {
            x[i] -= l1[i - 1] * x[i - 1];
        }
        if i >= 2 {
            x[i] -= l2[i - 2] * x[i - 2];
        }
    }
    for i in 0..n {
        x[i] /= d[i];
    }
    for i in (0..n).rev() {
        if i + 1 < n {
            x[i] -= l1[i] * x[i + 1];
        }
        if i + 2 < n {
            x[i] -= l2[i] * x[i + 2];
        }
    }
    x
}

/// Length of the training segment: `⌊ratio·N⌋`.
pub fn split_index(n: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} must be in (0, 1)")));
    }
    if n < MIN_SERIES_LEN {
        return Err(Error::TooShort {
            needed: MIN_SERIES_LEN,
            got: n,
        });
    }
    // guard against 0.8 * 10 = 7.999…
    let at = (ratio * n as f64 + 1e-9).floor() as usize;
    if at == 0 || at >= n {
        return Err(Error::invalid(format!("ratio {ratio} leaves an empty split of {n} points")));
    }
    Ok(at)
}

/// Chronological split, no shuffling.
pub fn train_test_split(series: &PriceSeries, ratio: f64) -> Result<(PriceSeries, PriceSeries)> {
    let at = split_index(series.len(), ratio)?;
    Ok(series.split_at(at))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingState {
    pub min: f64,
    pub max: f64,
}

impl ScalingState {
    pub fn apply_one(&self, p: f64) -> f64 {
        (p - self.min) / (self.max - self.min)
    }

    pub fn invert_one(&self, s: f64) -> f64 {
        s * (self.max - self.min) + self.min
    }

    pub fn apply(&self, prices: &[f64]) -> Vec<f64> {
        prices.iter().map(|&p| self.apply_one(p)).collect()
    }

    pub fn invert(&self, scaled: &[f64]) -> Vec<f64> {
        scaled.iter().map(|&s| self.invert_one(s)).collect()
    }
}

pub fn minmax_fit(train: &[f64]) -> Result<ScalingState> {
    if train.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if let Some(p) = train.iter().find(|p| !p.is_finite()) {
        return Err(Error::NonFinite(format!("min-max input {p}")));
    }
    let min = train.iter().copied().fold(f64::INFINITY, f64::min);
    let max = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::Degenerate(format!("constant training data ({min})")));
    }
    Ok(ScalingState { min, max })
}

pub fn minmax_apply(prices: &[f64], scaling: &ScalingState) -> Vec<f64> {
    scaling.apply(prices)
}

pub fn minmax_invert(scaled: &[f64], scaling: &ScalingState) -> Vec<f64> {
    scaling.invert(scaled)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Returns `(window / ‖window‖₂, ‖window‖₂)`.
pub fn l2_normalize(window: &[f64]) -> Result<(Vec<f64>, f64)> {
    let norm = l2_norm(window);
    if !norm.is_finite() {
        return Err(Error::NonFinite("window norm".into()));
    }
    if norm == 0.0 {
        return Err(Error::Degenerate("cannot normalize an all-zero window".into()));
    }
    Ok((window.iter().map(|x| x / norm).collect(), norm))
}

/// Past/future window lengths and stride. In overlapped mode each target also
/// repeats the last `future` points of its past window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub past: usize,
    pub future: usize,
    pub stride: usize,
    pub overlapped: bool,
}

impl WindowSpec {
    pub fn new(past: usize, future: usize) -> Result<Self> {
        Self {
            past,
            future,
            stride: 1,
            overlapped: false,
        }
        .validated()
    }

    pub fn overlapped(past: usize, future: usize) -> Result<Self> {
        Self {
            past,
            future,
            stride: 1,
            overlapped: true,
        }
        .validated()
    }

    pub fn with_stride(self, stride: usize) -> Result<Self> {
        Self { stride, ..self }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.past == 0 || self.future == 0 || self.stride == 0 {
            return Err(Error::invalid(format!(
                "window sizes and stride must be positive, got b={} f={} stride={}",
                self.past, self.future, self.stride
            )));
        }
        if self.overlapped && self.future > self.past {
            return Err(Error::invalid(format!(
                "overlapped windows need f <= b, got b={} f={}",
                self.past, self.future
            )));
        }
        Ok(self)
    }

    /// Length of each stored target: `f`, or `2f` when overlapped.
    pub fn target_len(&self) -> usize {
        if self.overlapped {
            2 * self.future
        } else {
            self.future
        }
    }

    /// Number of windows over a series of length `n`.
    pub fn count(&self, n: usize) -> usize {
        let span = self.past + self.future;
        if n < span {
            0
        } else {
            (n - span) / self.stride + 1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPair {
    /// Index of the first past point in the source series.
    pub start: usize,
    pub past: Vec<f64>,
    pub target: Vec<f64>,
    pub past_norm: f64,
    pub target_norm: f64,
}

impl WindowPair {
    pub fn normalized_past(&self) -> Result<Vec<f64>> {
        Ok(l2_normalize(&self.past)?.0)
    }

    pub fn normalized_target(&self) -> Result<Vec<f64>> {
        Ok(l2_normalize(&self.target)?.0)
    }

    /// The `future` values that are actually being forecast.
    pub fn future_values(&self, spec: &WindowSpec) -> &[f64] {
        &self.target[self.target.len() - spec.future..]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub spec: WindowSpec,
    pub scaling: Option<ScalingState>,
    /// Scaled values outside [0, 1] (test data scaled with training statistics).
    pub out_of_range: usize,
    pub pairs: Vec<WindowPair>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn with_scaling(mut self, scaling: ScalingState) -> Self {
        self.scaling = Some(scaling);
        self
    }
}

/// Slides `spec` over already-scaled prices.
pub fn make_windows(scaled: &[f64], spec: &WindowSpec) -> Result<WindowedDataset> {
    let spec = spec.validated()?;
    let (b, f) = (spec.past, spec.future);
    if scaled.len() < b + f {
        return Err(Error::TooShort {
            needed: b + f,
            got: scaled.len(),
        });
    }
    let target_offset = if spec.overlapped { b - f } else { b };
    let pairs = (0..spec.count(scaled.len()))
        .map(|k| {
            let t = k * spec.stride;
            let past = scaled[t..t + b].to_vec();
            let target = scaled[t + target_offset..t + b + f].to_vec();
            WindowPair {
                start: t,
                past_norm: l2_norm(&past),
                target_norm: l2_norm(&target),
                past,
                target,
            }
        })
        .collect();
    let out_of_range = scaled
        .iter()
        .filter(|v| !(0.0..=1.0).contains(*v))
        .count();
    Ok(WindowedDataset {
        spec,
        scaling: None,
        out_of_range,
        pairs,
    })
}

pub fn make_overlapped_windows(scaled: &[f64], b: usize, f: usize) -> Result<WindowedDataset> {
    make_windows(scaled, &WindowSpec::overlapped(b, f)?)
}

/// Closed-form minimizer of `Σ(aᵢ − c·ŷᵢ)²` over the scalar `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecovery {
    pub a: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub factor: f64,
    pub residual: f64,
}

pub fn recover_normalization(a: &[f64], y_hat: &[f64]) -> Result<NormalizationRecovery> {
    if a.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: y_hat.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let yy: f64 = y_hat.iter().map(|y| y * y).sum();
    if yy == 0.0 {
        return Err(Error::Degenerate("predicted overlap is all zero".into()));
    }
    let ay: f64 = a.iter().zip(y_hat).map(|(a, y)| a * y).sum();
    let factor = ay / yy;
    let residual = a
        .iter()
        .zip(y_hat)
        .map(|(a, y)| (a - factor * y).powi(2))
        .sum();
    Ok(NormalizationRecovery {
        a: a.to_vec(),
        y_hat: y_hat.to_vec(),
        factor,
        residual,
    })
}

/// Normalized predictions → price units: rescale by `factor`, undo min-max,
/// then re-smooth with the HP filter (skipped for fewer than 3 points).
/// The factor may be negative: test windows below the training minimum scale
/// to negative values.
pub fn inverse_pipeline(
    normalized: &[f64],
    factor: f64,
    scaling: &ScalingState,
    lambda: f64,
) -> Result<Vec<f64>> {
    if !factor.is_finite() {
        return Err(Error::NonFinite(format!("normalization factor {factor}")));
    }
    let scaled: Vec<f64> = normalized.iter().map(|y| factor * y).collect();
    let prices = scaling.invert(&scaled);
    if prices.len() < 3 {
        return Ok(prices);
    }
    hp_filter(&prices, lambda)
}

/// Output of the forward pipeline for one window spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prepared {
    pub hp_lambda: f64,
    pub split_ratio: f64,
    pub dates: Vec<NaiveDate>,
    pub raw: Vec<f64>,
    /// HP trend of `raw`; the series all windows and truths refer to.
    pub smoothed: Vec<f64>,
    pub split: usize,
    pub scaling: ScalingState,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

impl Prepared {
    pub fn scaled(&self) -> Vec<f64> {
        self.scaling.apply(&self.smoothed)
    }
}

pub fn prepare(
    series: &PriceSeries,
    hp_lambda: f64,
    split_ratio: f64,
    spec: &WindowSpec,
) -> Result<Prepared> {
    let spec = spec.validated()?;
    let smoothed = hp_filter(series.prices(), hp_lambda)?;
    let split = split_index(smoothed.len(), split_ratio)?;
    let scaling = minmax_fit(&smoothed[..split])?;
    let scaled = scaling.apply(&smoothed);
    let train = make_windows(&scaled[..split], &spec)?.with_scaling(scaling);
    let test = make_windows(&scaled[split..], &spec)?.with_scaling(scaling);
    Ok(Prepared {
        hp_lambda,
        split_ratio,
        dates: series.dates().to_vec(),
        raw: series.prices().to_vec(),
        smoothed,
        split,
        scaling,
        train,
        test,
    })
}

/// Seeded synthetic index: geometric random walk with a slow cycle, on
/// weekday dates starting 2014-01-02.
pub fn synthetic_prices(n: usize, seed: u64) -> PriceSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dates = Vec::with_capacity(n);
    let mut prices = Vec::with_capacity(n);
    let mut date = NaiveDate::from_ymd_opt(2014, 1, 2).expect("valid date");
    let mut log_price = 6500f64.ln();
    for t in 0..n {
        while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            date = date.succ_opt().expect("date in range");
        }
        dates.push(date);
        let cycle = 0.08 * (2.0 * std::f64::consts::PI * t as f64 / 260.0).sin();
        prices.push((log_price + cycle).exp());
        let z: f64 = StandardNormal.sample(&mut rng);
        log_price += 0.0002 + 0.009 * z;
        date = date.succ_opt().expect("date in range");
    }
    PriceSeries { dates, prices }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn parse(text: &str) -> Result<PriceSeries> {
        parse_csv(text.as_bytes(), Path::new("inline.csv"))
    }

    #[test]
    fn csv_basic() {
        let s = parse("date,adj_close\n2020-01-01,100.5\n2020-01-02,101\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.prices(), &[100.5, 101.0]);
    }

    #[test]
    fn csv_rejects_negative_price_with_line() {
        let err = parse("date,adj_close\n2020-01-01,100\n2020-01-02,-1.0\n").unwrap_err();
        match err {
            Error::Csv { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("-1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_sorts_and_rejects_duplicates() {
        let s = parse("date,adj_close\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n").unwrap();
        assert_eq!(s.dates(), &[d("2020-01-01"), d("2020-01-02"), d("2020-01-03")]);
        assert_eq!(s.prices(), &[1.0, 2.0, 3.0]);
        assert!(matches!(
            parse("date,adj_close\n2020-01-01,1\n2020-01-01,2\n"),
            Err(Error::Csv { line: 3, .. })
        ));
        assert!(parse("day,price\n2020-01-01,1\n").is_err());
        assert!(matches!(
            parse("date,adj_close\n2020-01-01,1,9\n"),
            Err(Error::Csv { line: 2, .. })
        ));
        assert!(parse("date,adj_close\n01/02/2020,1\n").is_err());
    }

    #[test]
    fn hp_lambda_zero_is_identity() {
        let y = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(hp_filter(&y, 0.0).unwrap(), y);
    }

    #[test]
    fn hp_linear_fixed_point() {
        let y: Vec<f64> = (0..40).map(|t| 2.5 * t as f64 - 7.0).collect();
        for lambda in [1.0, 1600.0, 1e6] {
            let tau = hp_filter(&y, lambda).unwrap();
            let err = tau.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            // The system's condition number grows linearly in lambda.
            assert!(err < 1e-12 * lambda.max(1e4), "lambda {lambda}: {err}");
        }
    }

    #[test]
    fn hp_errors() {
        assert!(matches!(hp_filter(&[1.0, 2.0], 10.0), Err(Error::TooShort { .. })));
        assert!(hp_filter(&[1.0, f64::NAN, 2.0], 10.0).is_err());
        assert!(hp_filter(&[1.0, 2.0, 3.0], -1.0).is_err());
        assert_eq!(hp_filter(&[1.0, 2.0], 0.0).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn split_sizes() {
        assert_eq!(split_index(10, 0.8).unwrap(), 8);
        assert_eq!(split_index(11, 0.8).unwrap(), 8);
        assert_eq!(split_index(2520, 0.8).unwrap(), 2016);
        assert!(split_index(9, 0.8).is_err());
        assert!(split_index(100, 1.0).is_err());
    }

    #[test]
    fn minmax_examples() {
        let s = minmax_fit(&[100.0, 200.0]).unwrap();
        assert_eq!(s.apply_one(150.0), 0.5);
        assert_eq!(s.apply_one(250.0), 1.5);
        assert!((s.invert_one(s.apply_one(123.456)) - 123.456).abs() < 1e-12);
        assert!(matches!(minmax_fit(&[5.0, 5.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn l2_examples() {
        let (u, n) = l2_normalize(&[3.0, 4.0]).unwrap();
        assert_eq!((u, n), (vec![0.6, 0.8], 5.0));
        let (u, n) = l2_normalize(&[0.6, 0.8]).unwrap();
        assert!((n - 1.0).abs() < 1e-15);
        assert!((u[0] - 0.6).abs() < 1e-15);
        assert!(l2_normalize(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn window_counts() {
        let p: Vec<f64> = (0..6).map(f64::from).collect();
        assert_eq!(make_windows(&p, &WindowSpec::new(3, 1).unwrap()).unwrap().len(), 3);
        let strided = WindowSpec::new(3, 1).unwrap().with_stride(2).unwrap();
        assert_eq!(make_windows(&p, &strided).unwrap().len(), 2);
        assert!(make_windows(&p[..3], &WindowSpec::new(3, 1).unwrap()).is_err());
    }

    #[test]
    fn window_contents() {
        let p = [10.0, 11.0, 12.0, 13.0, 14.0];
        let ds = make_windows(&p, &WindowSpec::new(2, 1).unwrap()).unwrap();
        let got: Vec<_> = ds.pairs.iter().map(|w| (w.past.clone(), w.target.clone())).collect();
        assert_eq!(
            got,
            vec![
                (vec![10.0, 11.0], vec![12.0]),
                (vec![11.0, 12.0], vec![13.0]),
                (vec![12.0, 13.0], vec![14.0]),
            ]
        );
    }

    #[test]
    fn overlapped_windows() {
        let p = [0.0, 1.0, 2.0, 3.0];
        let ds = make_overlapped_windows(&p, 2, 1).unwrap();
        assert_eq!(ds.pairs[0].past, vec![0.0, 1.0]);
        assert_eq!(ds.pairs[0].target, vec![1.0, 2.0]);
        assert!(make_overlapped_windows(&p, 1, 2).is_err());

        let long: Vec<f64> = (0..40).map(|t| t as f64 * 0.01).collect();
        let ds = make_overlapped_windows(&long, 16, 8).unwrap();
        for w in &ds.pairs {
            assert_eq!(w.target.len(), 16);
            assert_eq!(&w.target[..8], &w.past[8..]);
        }
    }

    #[test]
    fn recovery_examples() {
        let y = [0.1, 0.5, 0.3];
        let r = recover_normalization(&y, &y).unwrap();
        assert!((r.factor - 1.0).abs() < 1e-15);
        let a: Vec<f64> = y.iter().map(|v| 5.0 * v).collect();
        let r = recover_normalization(&a, &y).unwrap();
        assert!((r.factor - 5.0).abs() < 1e-12);
        assert!(r.residual < 1e-24);
        assert!(recover_normalization(&[1.0], &[0.0]).is_err());
        assert!(recover_normalization(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn inverse_pipeline_single_point_skips_hp() {
        let s = ScalingState { min: 100.0, max: 200.0 };
        let out = inverse_pipeline(&[1.0], 0.5, &s, 1600.0).unwrap();
        assert_eq!(out, vec![150.0]);
        assert!(inverse_pipeline(&[1.0], f64::NAN, &s, 0.0).is_err());
    }

    #[test]
    fn inverse_pipeline_round_trip() {
        let s = ScalingState { min: 50.0, max: 80.0 };
        let prices = [55.0, 61.0, 70.5, 66.0];
        let (unit, norm) = l2_normalize(&s.apply(&prices)).unwrap();
        let back = inverse_pipeline(&unit, norm, &s, 0.0).unwrap();
        for (a, b) in back.iter().zip(&prices) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn prepare_shapes() {
        let series = synthetic_prices(200, 7);
        let p = prepare(&series, 1600.0, 0.8, &WindowSpec::new(4, 2).unwrap()).unwrap();
        assert_eq!(p.split, 160);
        assert_eq!(p.train.len(), 160 - 6 + 1);
        assert_eq!(p.test.len(), 40 - 6 + 1);
        assert_eq!(p.train.out_of_range, 0);
        assert!(p.train.pairs.iter().all(|w| w.past.iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn synthetic_is_deterministic_and_on_weekdays() {
        let a = synthetic_prices(30, 1);
        assert_eq!(a, synthetic_prices(30, 1));
        assert_ne!(a, synthetic_prices(30, 2));
        assert!(a
            .dates()
            .iter()
            .all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }
}
