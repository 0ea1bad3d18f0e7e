//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};

use qganf_core::engines::window_spec;
use qganf_core::vqc::DEFAULT_LAYERS;
use qganf_core::{ModelKind, TrainConfig, WindowSpec};

use crate::CliError;

/// Every key the config file and command-line overrides accept.
pub const KEYS: &[(&str, &str)] = &[
    ("input", "price CSV with date and close columns (prepare, sweep)"),
    ("hp_lambda", "Hodrick-Prescott smoothing weight, >= 0 [1600]"),
    ("split_ratio", "training fraction of the series, in (0, 1) [0.8]"),
    ("b", "past window length"),
    ("f", "future window length"),
    ("stride", "step between window starts [1]"),
    ("kind", "simple_gan | gan_ti | hybrid_qgan | fqgan | invertible_fqgan"),
    ("epochs", "training epochs [per-kind default]"),
    ("batch_size", "minibatch size [per-kind default]"),
    ("lr_g", "generator Adam learning rate [per-kind default]"),
    ("lr_d", "discriminator Adam learning rate [per-kind default]"),
    ("beta1", "Adam first-moment decay for both optimizers [0.9]"),
    ("ansatz_layers", "variational layers L [3]"),
    ("noise_dim", "generator noise width [8 classical, 0 quantum]"),
    ("seed", "master seed [0]"),
    ("out", "output directory [out]"),
    ("windows", "window list for sweep/resources, e.g. 4:2,8:4,16:8,32:16"),
    ("kinds", "comma-separated kinds for sweep"),
    ("dataset", "prepared dataset path [<out>/dataset.json]"),
    ("model", "model artifact path [<out>/model.json]"),
    ("predictions", "predictions CSV path [<out>/predictions.csv]"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub input: Option<PathBuf>,
    pub hp_lambda: f64,
    pub split_ratio: f64,
    pub past: Option<usize>,
    pub future: Option<usize>,
    pub stride: usize,
    pub kind: Option<ModelKind>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr_g: Option<f64>,
    pub lr_d: Option<f64>,
    pub beta1: Option<f64>,
    pub ansatz_layers: usize,
    pub noise_dim: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub windows: Vec<(usize, usize)>,
    pub kinds: Vec<ModelKind>,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: None,
            hp_lambda: qganf_core::dataprep::DEFAULT_HP_LAMBDA,
            split_ratio: qganf_core::dataprep::DEFAULT_SPLIT_RATIO,
            past: None,
            future: None,
            stride: 1,
            kind: None,
            epochs: None,
            batch_size: None,
            lr_g: None,
            lr_d: None,
            beta1: None,
            ansatz_layers: DEFAULT_LAYERS,
            noise_dim: None,
            seed: 0,
            out: PathBuf::from("out"),
            windows: Vec::new(),
            kinds: Vec::new(),
            dataset: None,
            model: None,
            predictions: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| config_err(format!("{key}: cannot parse {value:?}")))
}

fn parse_windows(value: &str) -> Result<Vec<(usize, usize)>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (b, f) = item
                .split_once(':')
                .ok_or_else(|| config_err(format!("windows: expected b:f, got {item:?}")))?;
            Ok((number("windows", b.trim())?, number("windows", f.trim())?))
        })
        .collect()
}

fn parse_kinds(value: &str) -> Result<Vec<ModelKind>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e: qganf_core::Error| config_err(e.to_string())))
        .collect()
}

impl ExperimentConfig {
    /// Parses a config file body. `#` starts a comment; duplicate keys are
    /// rejected.
    pub fn parse(text: &str, source: &Path) -> Result<Self, CliError> {
        let mut config = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| config_err(format!("{}:{}: {msg}", source.display(), i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(at(format!("duplicate key {key:?}")));
            }
            seen.push(key);
            config.set(key, value.trim()).map_err(|e| at(e.to_string()))?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, item: &str) -> Result<(), CliError> {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| config_err(format!("override {item:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "hp_lambda" => self.hp_lambda = number(key, value)?,
            "split_ratio" => self.split_ratio = number(key, value)?,
            "b" => self.past = Some(number(key, value)?),
            "f" => self.future = Some(number(key, value)?),
            "stride" => self.stride = number(key, value)?,
            "kind" => {
                self.kind = Some(value.parse().map_err(|e: qganf_core::Error| config_err(e.to_string()))?)
            }
            "epochs" => self.epochs = Some(number(key, value)?),
            "batch_size" => self.batch_size = Some(number(key, value)?),
            "lr_g" => self.lr_g = Some(number(key, value)?),
            "lr_d" => self.lr_d = Some(number(key, value)?),
            "beta1" => self.beta1 = Some(number(key, value)?),
            "ansatz_layers" => self.ansatz_layers = number(key, value)?,
            "noise_dim" => self.noise_dim = Some(number(key, value)?),
            "seed" => self.seed = number(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "windows" => self.windows = parse_windows(value)?,
            "kinds" => self.kinds = parse_kinds(value)?,
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "model" => self.model = Some(PathBuf::from(value)),
            "predictions" => self.predictions = Some(PathBuf::from(value)),
            _ => return Err(config_err(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Checks every value that is set, independent of the command.
    pub fn validate(&self) -> Result<(), CliError> {
        if !self.hp_lambda.is_finite() || self.hp_lambda < 0.0 {
            return Err(config_err(format!("hp_lambda must be >= 0, got {}", self.hp_lambda)));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(config_err(format!("split_ratio must be in (0, 1), got {}", self.split_ratio)));
        }
        if self.stride == 0 {
            return Err(config_err("stride must be >= 1"));
        }
        if self.past == Some(0) || self.future == Some(0) {
            return Err(config_err("b and f must be >= 1"));
        }
        if let Some(&(b, f)) = self.windows.iter().find(|(b, f)| *b == 0 || *f == 0) {
            return Err(config_err(format!("window {b}:{f} must have b, f >= 1")));
        }
        if let Some(beta1) = self.beta1 {
            if !(0.0..1.0).contains(&beta1) {
                return Err(config_err(format!("beta1 must be in [0, 1), got {beta1}")));
            }
        }
        for kind in self.kind.iter().chain(&self.kinds) {
            self.train_config(*kind).validate()?;
        }
        if let (Some(kind), Some(b), Some(f)) = (self.kind, self.past, self.future) {
            kind.supports(b, f, self.train_config(kind).noise_dim)?;
        }
        Ok(())
    }

    /// Per-kind defaults with this config's overrides applied.
    pub fn train_config(&self, kind: ModelKind) -> TrainConfig {
        let mut c = TrainConfig::for_kind(kind);
        c.seed = self.seed;
        c.hp_lambda = self.hp_lambda;
        c.ansatz_layers = self.ansatz_layers;
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.lr_g {
            c.generator_adam.lr = v;
        }
        if let Some(v) = self.lr_d {
            c.discriminator_adam.lr = v;
        }
        if let Some(v) = self.beta1 {
            c.generator_adam.beta1 = v;
            c.discriminator_adam.beta1 = v;
        }
        if let Some(v) = self.noise_dim {
            c.noise_dim = v;
        }
        c
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| config_err("missing key: input"))
    }

    pub fn require_kind(&self) -> Result<ModelKind, CliError> {
        self.kind.ok_or_else(|| config_err("missing key: kind"))
    }

    pub fn require_window(&self) -> Result<(usize, usize), CliError> {
        match (self.past, self.future) {
            (Some(b), Some(f)) => Ok((b, f)),
            _ => Err(config_err("missing keys: b and f")),
        }
    }

    /// Window spec for `prepare`; overlapped when the kind needs it.
    pub fn window_spec(&self) -> Result<WindowSpec, CliError> {
        let (b, f) = self.require_window()?;
        let spec = match self.kind {
            Some(kind) => window_spec(kind, b, f)?,
            None => WindowSpec::new(b, f)?,
        };
        Ok(spec.with_stride(self.stride)?)
    }

    /// `windows`, or the single `(b, f)` pair when no list is given.
    pub fn window_list(&self) -> Result<Vec<(usize, usize)>, CliError> {
        if !self.windows.is_empty() {
            return Ok(self.windows.clone());
        }
        match (self.past, self.future) {
            (Some(b), Some(f)) => Ok(vec![(b, f)]),
            _ => Err(config_err("window list is empty (set windows or b and f)")),
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset.json"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out.join("model.json"))
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.predictions.clone().unwrap_or_else(|| self.out.join("predictions.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(text, Path::new("test.cfg"))
    }

    #[test]
    fn parses_all_keys() {
        let c = parse(
            "# experiment\ninput = prices.csv\nhp_lambda = 0\nb = 4\nf = 2 # trailing\nkind = fqgan\n\
             windows = 4:2, 8:4\nkinds = simple_gan,fqgan\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(c.input.as_deref(), Some(Path::new("prices.csv")));
        assert_eq!((c.past, c.future, c.kind), (Some(4), Some(2), Some(ModelKind::Fqgan)));
        assert_eq!(c.windows, vec![(4, 2), (8, 4)]);
        assert_eq!(c.kinds, vec![ModelKind::SimpleGan, ModelKind::Fqgan]);
        assert_eq!(c.train_config(ModelKind::Fqgan).seed, 7);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let e = parse("b = 4\nbogus = 1\n").unwrap_err().to_string();
        assert!(e.contains("test.cfg:2") && e.contains("bogus"), "{e}");
        assert!(parse("b = 4\nb = 5\n").is_err());
        assert!(parse("b 4\n").is_err());
        assert!(parse("b = four\n").is_err());
        assert!(parse("kind = lstm\n").is_err());
        assert!(parse("hp_lambda = -1\n").unwrap().validate().is_err());
        assert!(parse("split_ratio = 1\n").unwrap().validate().is_err());
        assert!(parse("kind = fqgan\nnoise_dim = 2\n").unwrap().validate().is_err());
        assert!(parse("kind = hybrid_qgan\nb = 4\nf = 2\n").unwrap().validate().is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = parse("seed = 1\nepochs = 3\n").unwrap();
        c.apply_override("epochs=9").unwrap();
        assert_eq!(c.train_config(ModelKind::SimpleGan).epochs, 9);
        assert!(c.apply_override("epochs").is_err());
        assert!(c.apply_override("nope=1").is_err());
    }

    #[test]
    fn overlapped_spec_follows_kind() {
        let c = parse("b = 8\nf = 4\nkind = invertible_fqgan\n").unwrap();
        assert!(c.window_spec().unwrap().overlapped);
        let c = parse("b = 8\nf = 4\n").unwrap();
        assert!(!c.window_spec().unwrap().overlapped);
    }
}
