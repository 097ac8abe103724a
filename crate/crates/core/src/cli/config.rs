//! Run configuration: a JSON file with every key optional, plus
//! `--set dotted.key=value` overrides applied before validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::synth::{DecayProcessConfig, HawkesConfig, PoissonConfig};
use crate::decay::DEFAULT_REGIME_TOL;
use crate::error::{GruweError, Result};
use crate::model::Task;
use crate::training::{ForecastProtocol, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub task: Task,
    /// D for forecasting; inferred from the data when absent.
    pub input_dim: Option<usize>,
    /// K for point processes; inferred from the data when absent.
    pub num_types: Option<usize>,
    pub hidden_dim: usize,
    /// P for forecasting; defaults to D.
    pub output_dim: Option<usize>,

    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub mc_samples: usize,
    pub observe_fraction: f64,
    pub prefix_loss: bool,
    pub batch_size: usize,
    pub workers: usize,

    pub data: Option<PathBuf>,
    /// train / validation / test ratios.
    pub split: [f64; 3],
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,

    /// "train", "validation", "test" or "all".
    pub eval_split: String,
    pub eval_report: Option<PathBuf>,
    pub eval_seed: u64,
    pub metrics_csv: Option<PathBuf>,
    pub quadrature: QuadratureConfig,

    pub predict: PredictConfig,
    pub synth: SynthConfig,
    pub bench: BenchConfig,
    pub regime_tol: f64,
}

impl Default for Config {
    fn default() -> Self {
        let t = TrainConfig::default();
        Config {
            task: Task::Forecast,
            input_dim: None,
            num_types: None,
            hidden_dim: 16,
            output_dim: None,
            seed: t.seed,
            epochs: t.epochs,
            lr: t.lr,
            lr_decay: t.lr_decay,
            clip_norm: t.clip_norm,
            mc_samples: t.mc_samples,
            observe_fraction: t.protocol.observe_fraction,
            prefix_loss: t.protocol.prefix_loss,
            batch_size: t.batch_size,
            workers: t.workers,
            data: None,
            split: [0.7, 0.15, 0.15],
            checkpoint: None,
            report: None,
            eval_split: "test".into(),
            eval_report: None,
            eval_seed: 20_250_101,
            metrics_csv: None,
            quadrature: QuadratureConfig::default(),
            predict: PredictConfig::default(),
            synth: SynthConfig::default(),
            bench: BenchConfig::default(),
            regime_tol: DEFAULT_REGIME_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Upper quadrature limit as a multiple of the training mean
    /// inter-arrival time.
    pub hmax_multiplier: f64,
    pub grid: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            hmax_multiplier: 20.0,
            grid: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    /// Input sequences; falls back to `data`.
    pub input: Option<PathBuf>,
    pub horizons: Vec<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// "decay", "poisson" or "hawkes".
    pub generator: String,
    pub out: Option<PathBuf>,
    pub decay: DecayProcessConfig,
    pub poisson: PoissonConfig,
    pub hawkes: HawkesConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            generator: "decay".into(),
            out: None,
            decay: DecayProcessConfig::default(),
            poisson: PoissonConfig::default(),
            hawkes: HawkesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub steps: usize,
    pub predict_every: usize,
    pub warmup: usize,
    /// Series file to replay; a synthetic stream is generated when absent.
    pub stream: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            steps: 10_000,
            predict_every: 10,
            warmup: 100,
            stream: None,
            out: None,
        }
    }
}

impl Config {
    /// Reads `path` (if any), applies `overrides` and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| GruweError::Config(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str::<serde_json::Value>(&text)
                    .map_err(|e| GruweError::Config(format!("config {} is not valid JSON: {e}", p.display())))?
            }
            None => serde_json::Value::Object(Default::default()),
        };
        if !value.is_object() {
            return Err(GruweError::Config("config must be a JSON object".into()));
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Config = serde_json::from_value(value).map_err(|e| GruweError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(GruweError::Config("hidden_dim must be positive".into()));
        }
        if !["train", "validation", "test", "all"].contains(&self.eval_split.as_str()) {
            return Err(GruweError::Config(format!("unknown eval_split {:?}", self.eval_split)));
        }
        if !(self.quadrature.hmax_multiplier > 0.0) || self.quadrature.grid < 2 {
            return Err(GruweError::Config("quadrature needs hmax_multiplier > 0 and grid >= 2".into()));
        }
        if !(self.regime_tol >= 0.0) {
            return Err(GruweError::Config("regime_tol must be non-negative".into()));
        }
        self.train_config().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            epochs: self.epochs,
            lr: self.lr,
            lr_decay: self.lr_decay,
            clip_norm: self.clip_norm,
            mc_samples: self.mc_samples,
            protocol: ForecastProtocol {
                observe_fraction: self.observe_fraction,
                prefix_loss: self.prefix_loss,
            },
            batch_size: self.batch_size,
            workers: self.workers,
        }
    }
}

/// `a.b.c=value`: the value is parsed as JSON, falling back to a plain
/// string, and written at the dotted path (creating objects as needed).
pub fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| GruweError::Config(format!("--set expects key=value, got {spec:?}")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(GruweError::Config(format!("bad override key {key:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| GruweError::Config(format!("override {key:?} descends into a non-object")))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        node = obj
            .entry((*part).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = Config::load(None, &[]).unwrap();
        assert_eq!(c.lr_decay, 0.99);
        assert_eq!(c.clip_norm, 1.0);
        assert_eq!(c.mc_samples, 20);
        assert_eq!(c.observe_fraction, 0.5);
        assert_eq!(c.quadrature.hmax_multiplier, 20.0);
        assert_eq!(c.quadrature.grid, 500);
        assert_eq!(c.workers, 1);
        assert!(!c.prefix_loss);
    }

    #[test]
    fn overrides() {
        let c = Config::load(
            None,
            &[
                "task=tpp".into(),
                "lr=0.5".into(),
                "quadrature.grid=77".into(),
                "data=/tmp/x.jsonl".into(),
                "synth.hawkes.alpha=0.3".into(),
                "predict.horizons=[0,1.5]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.task, Task::Tpp);
        assert_eq!(c.lr, 0.5);
        assert_eq!(c.quadrature.grid, 77);
        assert_eq!(c.data.as_deref(), Some(Path::new("/tmp/x.jsonl")));
        assert_eq!(c.synth.hawkes.alpha, 0.3);
        assert_eq!(c.predict.horizons, vec![0.0, 1.5]);
    }

    #[test]
    fn rejections() {
        for bad in ["nope=1", "quadrature.nope=1", "lr", "=3", "a..b=1", "epochs=0", "task=regression", "lr=oops"] {
            let err = Config::load(None, &[bad.into()]).unwrap_err();
            assert!(matches!(err, GruweError::Config(_)), "{bad}: {err:?}");
        }
        assert!(Config::load(None, &["lr=1".into(), "lr.x=2".into()]).is_err());
    }

    #[test]
    fn file_then_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"epochs": 3, "hidden_dim": 4}"#).unwrap();
        let c = Config::load(Some(&p), &["epochs=5".into()]).unwrap();
        assert_eq!((c.epochs, c.hidden_dim), (5, 4));
        std::fs::write(&p, "[1,2]").unwrap();
        assert!(Config::load(Some(&p), &[]).is_err());
        std::fs::write(&p, "{oops").unwrap();
        assert!(Config::load(Some(&p), &[]).is_err());
        assert!(Config::load(Some(&dir.path().join("missing.json")), &[]).is_err());
    }
}
