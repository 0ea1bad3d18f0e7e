//! Technical indicators and low-pass Fourier trends.
//!
//! Indicators that need history return `None` during their warm-up.

use std::io::Write;

use chrono::NaiveDate;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn moving_average(prices: &[f64], window: usize) -> Result<Vec<Option<f64>>> {
    if window == 0 {
        return Err(Error::invalid("moving-average window must be >= 1"));
    }
    if window > prices.len() {
        return Err(Error::TooShort {
            needed: window,
            got: prices.len(),
        });
    }
    let mut out = vec![None; window - 1];
    for w in prices.windows(window) {
        out.push(Some(w.iter().sum::<f64>() / window as f64));
    }
    Ok(out)
}

/// Exponential moving average with `α = 2/(span+1)`, seeded with the first price.
pub fn ema(prices: &[f64], span: usize) -> Result<Vec<f64>> {
    if span == 0 {
        return Err(Error::invalid("EMA span must be >= 1"));
    }
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(prices.len());
    let mut prev = match prices.first() {
        Some(&p) => p,
        None => return Ok(out),
    };
    for &p in prices {
        prev = alpha * p + (1.0 - alpha) * prev;
        out.push(prev);
    }
    Ok(out)
}

/// `pₜ − pₜ₋ₖ`.
pub fn momentum(prices: &[f64], lag: usize) -> Result<Vec<Option<f64>>> {
    if lag == 0 {
        return Err(Error::invalid("momentum lag must be >= 1"));
    }
    if lag >= prices.len() {
        return Err(Error::TooShort {
            needed: lag + 1,
            got: prices.len(),
        });
    }
    let mut out = vec![None; lag];
    out.extend((lag..prices.len()).map(|t| Some(prices[t] - prices[t - lag])));
    Ok(out)
}

/// For each `c` in `components`, keeps the DC term and the `c` lowest-frequency
/// conjugate pairs of the spectrum and transforms back.
pub fn fourier_trends(prices: &[f64], components: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n = prices.len();
    if let Some(&c) = components.iter().find(|&&c| c == 0 || c > n / 2) {
        return Err(Error::invalid(format!(
            "Fourier component count {c} must be in 1..={} for length {n}",
            n / 2
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut spectrum: Vec<Complex64> = prices.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    forward.process(&mut spectrum);

    let mut out = Vec::with_capacity(components.len());
    for &c in components {
        let mut buf: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(k, &z)| if k <= c || k >= n - c { z } else { Complex64::new(0.0, 0.0) })
            .collect();
        inverse.process(&mut buf);
        out.push(buf.iter().map(|z| z.re / n as f64).collect());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub ma_short: usize,
    pub ma_long: usize,
    pub ema_span: usize,
    pub momentum_lag: usize,
    pub fourier_components: Vec<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            ma_short: 7,
            ma_long: 21,
            ema_span: 12,
            momentum_lag: 10,
            fourier_components: vec![3, 6, 9],
        }
    }
}

impl FeatureConfig {
    fn warmup(&self) -> usize {
        self.ma_short
            .saturating_sub(1)
            .max(self.ma_long.saturating_sub(1))
            .max(self.momentum_lag)
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![
            "adj_close".to_string(),
            format!("ma{}", self.ma_short),
            format!("ma{}", self.ma_long),
            "ema".to_string(),
            "momentum".to_string(),
        ];
        names.extend(self.fourier_components.iter().map(|c| format!("fourier_{c}")));
        names
    }
}

/// Column-major indicator table aligned to the source series from `start` on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// Index in the source series of the first emitted row.
    pub start: usize,
    pub columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Writes `date,<columns…>` (or `index,<columns…>` without dates).
    pub fn write_csv<W: Write>(&self, out: W, dates: Option<&[NaiveDate]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let first = if dates.is_some() { "date" } else { "index" };
        let header: Vec<&str> = std::iter::once(first)
            .chain(self.names.iter().map(String::as_str))
            .collect();
        let to_err = |e: csv::Error| Error::invalid(format!("writing features: {e}"));
        w.write_record(&header).map_err(to_err)?;
        for i in 0..self.n_rows() {
            let key = match dates {
                Some(d) => d[self.start + i].to_string(),
                None => (self.start + i).to_string(),
            };
            let mut rec = vec![key];
            rec.extend(self.columns.iter().map(|c| c[i].to_string()));
            w.write_record(&rec).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("writing features: {e}")))?;
        Ok(())
    }
}

pub fn feature_matrix(prices: &[f64], config: &FeatureConfig) -> Result<FeatureMatrix> {
    let warmup = config.warmup();
    if prices.len() <= warmup {
        return Err(Error::TooShort {
            needed: warmup + 1,
            got: prices.len(),
        });
    }
    let trim = |v: Vec<Option<f64>>| -> Vec<f64> { v[warmup..].iter().map(|x| x.expect("past warm-up")).collect() };
    let mut columns = vec![
        prices[warmup..].to_vec(),
        trim(moving_average(prices, config.ma_short)?),
        trim(moving_average(prices, config.ma_long)?),
        ema(prices, config.ema_span)?[warmup..].to_vec(),
        trim(momentum(prices, config.momentum_lag)?),
    ];
    for trend in fourier_trends(prices, &config.fourier_components)? {
        columns.push(trend[warmup..].to_vec());
    }
    Ok(FeatureMatrix {
        names: config.column_names(),
        start: warmup,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ma_examples() {
        assert_eq!(
            moving_average(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(),
            vec![None, Some(1.5), Some(2.5), Some(3.5)]
        );
        let c = moving_average(&[4.2; 10], 3).unwrap();
        assert!(c[2..].iter().all(|v| (v.unwrap() - 4.2).abs() < 1e-12));
        assert!(moving_average(&[1.0], 2).is_err());
        assert!(moving_average(&[1.0], 0).is_err());
    }

    #[test]
    fn ema_examples() {
        assert!(ema(&[3.0; 20], 12).unwrap().iter().all(|v| (v - 3.0).abs() < 1e-12));
        let p = [1.0, 5.0, 2.0, 8.0];
        assert_eq!(ema(&p, 1).unwrap(), p.to_vec());
        assert!(ema(&p, 0).is_err());
    }

    #[test]
    fn momentum_examples() {
        let m = momentum(&[2.0; 5], 2).unwrap();
        assert_eq!(m, vec![None, None, Some(0.0), Some(0.0), Some(0.0)]);
        let arith: Vec<f64> = (0..8).map(|t| 1.0 + 0.5 * t as f64).collect();
        assert!(momentum(&arith, 1).unwrap()[1..].iter().all(|v| *v == Some(0.5)));
        assert!(momentum(&arith, 8).is_err());
    }

    #[test]
    fn fourier_full_and_single_sinusoid() {
        let p = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0, 3.0];
        let full = &fourier_trends(&p, &[3]).unwrap()[0];
        for (a, b) in full.iter().zip(&p) {
            assert!((a - b).abs() < 1e-9);
        }
        let n = 32;
        let sine: Vec<f64> = (0..n)
            .map(|t| 10.0 + 2.0 * (2.0 * std::f64::consts::PI * t as f64 / n as f64 + 0.3).cos())
            .collect();
        let rec = &fourier_trends(&sine, &[1]).unwrap()[0];
        for (a, b) in rec.iter().zip(&sine) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(fourier_trends(&p, &[0]).is_err());
        assert!(fourier_trends(&p, &[4]).is_err());
    }

    #[test]
    fn constant_feature_matrix() {
        let fm = feature_matrix(&[250.0; 100], &FeatureConfig::default()).unwrap();
        assert_eq!(fm.n_cols(), 8);
        assert_eq!(fm.n_rows(), 80);
        for (name, col) in fm.names.iter().zip(&fm.columns) {
            let expect = if name == "momentum" { 0.0 } else { 250.0 };
            assert!(col.iter().all(|v| (v - expect).abs() < 1e-9), "{name}");
        }
        assert!(feature_matrix(&[1.0; 20], &FeatureConfig::default()).is_err());
    }

    #[test]
    fn csv_export_header() {
        let fm = feature_matrix(&(1..=40).map(f64::from).collect::<Vec<_>>(), &FeatureConfig::default())
            .unwrap();
        let mut buf = Vec::new();
        fm.write_csv(&mut buf, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "index,adj_close,ma7,ma21,ema,momentum,fourier_3,fourier_6,fourier_9\n20,21"
        ));
    }
}
