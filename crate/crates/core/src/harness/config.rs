//! `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key has a default, so an
//! empty file is valid; unknown keys and malformed values are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::cv::{CvSettings, GridKind};
use crate::error::{Error, Result};
use crate::graph::{one_hot_features, parse_tu_dataset, Dataset};
use crate::model::{Architecture, ModelConfig, ReconstructionKind};
use crate::nn::Hyper;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: String,
    /// Directory holding `{dataset}/{dataset}_*.txt`, or the files directly.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub precision: Precision,
    pub model: ModelConfig,
    pub hyper: Hyper,
    pub cv: CvSettings,
    pub sweep: GridKind,
    /// Overrides the default grid of `sweep` when set.
    pub sweep_values: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: "MUTAG".into(),
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            precision: Precision::F32,
            model: ModelConfig::default(),
            hyper: Hyper::default(),
            cv: CvSettings::default(),
            sweep: GridKind::Lambda,
            sweep_values: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "dataset", "data_dir", "out_dir", "precision", "arch", "layers", "hidden", "readout", "use_lfr", "use_dc",
    "use_gca", "lambda", "dropout", "reconstruction", "bn_momentum", "bn_eps", "lr", "decay_factor", "decay_every",
    "epochs", "batch_size", "seed", "adam_beta1", "adam_beta2", "adam_eps", "folds", "fold_seed", "sweep",
    "sweep_values",
];

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for `{key}`: `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid value for `{key}`: `{value}` (expected true/false)"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let m = &mut self.model;
        let h = &mut self.hyper;
        match key.trim() {
            "dataset" => self.dataset = v.to_string(),
            "data_dir" => self.data_dir = PathBuf::from(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "precision" => {
                self.precision = match v {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(Error::Config(format!("invalid value for `precision`: `{v}` (f32 or f64)"))),
                }
            }
            "arch" => {
                m.arch = match v.to_ascii_lowercase().as_str() {
                    "lpdgcn" | "lpd-gcn" => Architecture::Lpdgcn,
                    "gin" => Architecture::Gin,
                    _ => return Err(Error::Config(format!("invalid value for `arch`: `{v}` (lpdgcn or gin)"))),
                }
            }
            "layers" => m.layers = parse(key, v)?,
            "hidden" => m.hidden = parse(key, v)?,
            "readout" => m.readout = parse(key, v)?,
            "use_lfr" => m.use_lfr = parse_bool(key, v)?,
            "use_dc" => m.use_dc = parse_bool(key, v)?,
            "use_gca" => m.use_gca = parse_bool(key, v)?,
            "lambda" => m.lambda = parse(key, v)?,
            "dropout" => m.dropout = parse(key, v)?,
            "reconstruction" => {
                m.reconstruction = match v {
                    "onehot" => ReconstructionKind::OneHot,
                    "continuous" => ReconstructionKind::Continuous,
                    _ => {
                        return Err(Error::Config(format!(
                            "invalid value for `reconstruction`: `{v}` (onehot or continuous)"
                        )))
                    }
                }
            }
            "bn_momentum" => m.bn_momentum = parse(key, v)?,
            "bn_eps" => m.bn_eps = parse(key, v)?,
            "lr" => h.base_lr = parse(key, v)?,
            "decay_factor" => h.decay_factor = parse(key, v)?,
            "decay_every" => h.decay_every = parse(key, v)?,
            "epochs" => h.epochs = parse(key, v)?,
            "batch_size" => h.batch_size = parse(key, v)?,
            "seed" => h.seed = parse(key, v)?,
            "adam_beta1" => h.adam.beta1 = parse(key, v)?,
            "adam_beta2" => h.adam.beta2 = parse(key, v)?,
            "adam_eps" => h.adam.eps = parse(key, v)?,
            "folds" => self.cv.folds = parse(key, v)?,
            "fold_seed" => self.cv.fold_seed = parse(key, v)?,
            "sweep" => {
                self.sweep = match v {
                    "lambda" => GridKind::Lambda,
                    "dropout" => GridKind::Dropout,
                    _ => return Err(Error::Config(format!("invalid value for `sweep`: `{v}` (lambda or dropout)"))),
                }
            }
            "sweep_values" => {
                self.sweep_values = if v.is_empty() {
                    None
                } else {
                    Some(v.split(',').map(|s| parse(key, s.trim())).collect::<Result<_>>()?)
                }
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_config(e))))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{kv}` is not `key=value`")))?;
        self.set(k, v)
    }

    /// Defaults, then the optional file, then the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut c = RunConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            c.apply_text(&text)?;
        }
        for o in overrides {
            c.apply_override(o)?;
        }
        Ok(c)
    }

    pub fn sweep_grid(&self) -> Vec<f64> {
        self.sweep_values.clone().unwrap_or_else(|| self.sweep.default_values())
    }

    /// Reads the dataset with one-hot node-label features and sizes the
    /// model's input and output widths from it.
    pub fn load_dataset(&mut self) -> Result<Dataset> {
        let nested = self.data_dir.join(&self.dataset);
        let dir = if nested.is_dir() { nested } else { self.data_dir.clone() };
        let ds = one_hot_features(parse_tu_dataset(&dir, &self.dataset)?);
        self.model.input_dim = ds.feature_dim();
        self.model.num_classes = ds.num_classes;
        Ok(ds)
    }

    /// Every effective setting as a loadable `key = value` file.
    pub fn render(&self) -> String {
        let m = &self.model;
        let h = &self.hyper;
        let arch = match m.arch {
            Architecture::Lpdgcn => "lpdgcn",
            Architecture::Gin => "gin",
        };
        let recon = match m.reconstruction {
            ReconstructionKind::OneHot => "onehot",
            ReconstructionKind::Continuous => "continuous",
        };
        let values = self
            .sweep_values
            .as_ref()
            .map(|v| v.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        let pairs: Vec<(&str, String)> = vec![
            ("dataset", self.dataset.clone()),
            ("data_dir", self.data_dir.display().to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("precision", self.precision.name().into()),
            ("arch", arch.into()),
            ("layers", m.layers.to_string()),
            ("hidden", m.hidden.to_string()),
            ("readout", m.readout.to_string()),
            ("use_lfr", m.use_lfr.to_string()),
            ("use_dc", m.use_dc.to_string()),
            ("use_gca", m.use_gca.to_string()),
            ("lambda", m.lambda.to_string()),
            ("dropout", m.dropout.to_string()),
            ("reconstruction", recon.into()),
            ("bn_momentum", m.bn_momentum.to_string()),
            ("bn_eps", m.bn_eps.to_string()),
            ("lr", h.base_lr.to_string()),
            ("decay_factor", h.decay_factor.to_string()),
            ("decay_every", h.decay_every.to_string()),
            ("epochs", h.epochs.to_string()),
            ("batch_size", h.batch_size.to_string()),
            ("seed", h.seed.to_string()),
            ("adam_beta1", h.adam.beta1.to_string()),
            ("adam_beta2", h.adam.beta2.to_string()),
            ("adam_eps", h.adam.eps.to_string()),
            ("folds", self.cv.folds.to_string()),
            ("fold_seed", self.cv.fold_seed.to_string()),
            ("sweep", self.sweep.name().into()),
            ("sweep_values", values),
        ];
        debug_assert_eq!(pairs.len(), KEYS.len());
        let mut s = String::new();
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("lambda = 0.4 # weight\n\n# comment\nprecision=f64\nsweep_values = 0, 0.5").unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.render()).unwrap();
        assert_eq!(c, d);
        assert_eq!(d.sweep_grid(), vec![0.0, 0.5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::default().apply_text("lamda = 1").unwrap_err();
        assert!(err.to_string().contains("line 1") && err.to_string().contains("lamda"));
        assert!(RunConfig::default().apply_override("epochs=ten").is_err());
        assert!(RunConfig::default().apply_override("epochs").is_err());
    }
}
