//! Optimization: Adam with per-epoch learning-rate decay, global-norm
//! clipping, validation-based epoch selection and checkpoints.

mod checkpoint;
mod loss;
mod optim;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
pub use loss::{event_loss, forecast_loss, ForecastProtocol, SeqLoss};
pub use optim::{clip_global_norm, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{EventSequence, IrregularSeries};
use crate::error::{GruweError, Result};
use crate::model::{Grads, GruweParams, ModelDims, Task};
use crate::numerics::RngState;
use crate::parallel::Executor;

pub const TRAIN_REPORT_FORMAT: &str = "gruwe-train-report";
pub const REPORT_VERSION: u32 = 1;

/// Stream tags for [`RngState::derive`].
const STREAM_INIT: u64 = 0x1417;
const STREAM_ORDER: u64 = 0x0de5;
const STREAM_VALIDATION: u64 = 0x7a11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub mc_samples: usize,
    pub protocol: ForecastProtocol,
    /// Sequences per optimizer step.
    pub batch_size: usize,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            epochs: 20,
            lr: 0.01,
            lr_decay: 0.99,
            clip_norm: 1.0,
            mc_samples: 20,
            protocol: ForecastProtocol::default(),
            batch_size: 1,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(GruweError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(GruweError::Config("batch_size must be at least 1".into()));
        }
        if self.mc_samples == 0 {
            return Err(GruweError::Config("mc_samples must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(GruweError::Config("workers must be at least 1".into()));
        }
        self.protocol.validate()
    }
}

/// Training data of either task.
#[derive(Debug, Clone, Copy)]
pub enum TrainData<'a> {
    Series(&'a [IrregularSeries]),
    Events(&'a [EventSequence]),
}

impl TrainData<'_> {
    pub fn len(&self) -> usize {
        match self {
            TrainData::Series(s) => s.len(),
            TrainData::Events(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn task(&self) -> Task {
        match self {
            TrainData::Series(_) => Task::Forecast,
            TrainData::Events(_) => Task::Tpp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sequence loss over scored training sequences.
    pub train_loss: f64,
    pub validation_metric: f64,
    /// Training sequences with nothing to score this epoch.
    pub skipped_sequences: usize,
    pub clipped_steps: usize,
}

/// Deterministic content of a run. Wall-clock timings are kept separately
/// in [`TrainReport::epoch_seconds`] so the serialized report is
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub seed: u64,
    /// "masked_mse" or "nll_per_sequence"; lower is better.
    pub validation_metric: String,
    pub validation_on_train: bool,
    pub epochs: Vec<EpochRecord>,
    pub selected_epoch: usize,
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
}

impl TrainReport {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.selected_epoch]
    }

    pub fn timing_json(&self) -> serde_json::Value {
        serde_json::json!({ "epoch_seconds": self.epoch_seconds })
    }
}

/// Loss and gradient of one sequence.
fn sequence_grad(
    data: TrainData<'_>,
    idx: usize,
    params: &GruweParams,
    cfg: &TrainConfig,
    rng: &mut RngState,
    grads: Option<&mut Grads>,
) -> Result<SeqLoss> {
    match data {
        TrainData::Series(s) => forecast_loss(&s[idx], params, &cfg.protocol, grads),
        TrainData::Events(e) => event_loss(&e[idx], params, cfg.mc_samples, rng, grads),
    }
}

/// Lower-is-better validation score: pooled masked MSE over all targets
/// (forecast) or mean NLL per sequence with fixed compensator samples (tpp).
pub fn validation_metric(
    data: TrainData<'_>,
    params: &GruweParams,
    cfg: &TrainConfig,
    exec: &Executor,
) -> Result<f64> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let losses = exec.try_map(&idx, |_, &i| {
        let mut rng = RngState::derive(cfg.seed, &[STREAM_VALIDATION, i as u64]);
        sequence_grad(data, i, params, cfg, &mut rng, None)
    })?;
    match data {
        TrainData::Series(_) => {
            let (num, den) = losses
                .iter()
                .filter(|l| !l.skipped)
                .fold((0.0, 0.0), |(n, d), l| (n + l.loss * l.targets, d + l.targets));
            if den == 0.0 {
                return Err(GruweError::Data("validation data has no observed targets".into()));
            }
            Ok(num / den)
        }
        TrainData::Events(_) => Ok(losses.iter().map(|l| l.loss).sum::<f64>() / losses.len() as f64),
    }
}

/// Fits a freshly initialized model. Returns the parameters of the epoch
/// with the lowest validation metric (training data stands in when
/// `validation` is empty).
pub fn train(
    dims: ModelDims,
    train_data: TrainData<'_>,
    validation: TrainData<'_>,
    cfg: &TrainConfig,
) -> Result<(GruweParams, TrainReport)> {
    let task = train_data.task();
    let init = GruweParams::init(task, dims, &mut RngState::derive(cfg.seed, &[STREAM_INIT]))?;
    train_from(init, train_data, validation, cfg)
}

/// Like [`train`] but from given starting parameters.
pub fn train_from(
    mut params: GruweParams,
    train_data: TrainData<'_>,
    validation: TrainData<'_>,
    cfg: &TrainConfig,
) -> Result<(GruweParams, TrainReport)> {
    cfg.validate()?;
    let task = train_data.task();
    if params.task() != task || validation.task() != task {
        return Err(GruweError::Config(format!("model task {} does not match the data", params.task())));
    }
    if train_data.is_empty() {
        return Err(GruweError::Config("training set is empty".into()));
    }
    let exec = Executor::new(cfg.workers)?;
    let mut opt = OptimizerState::new(&params, cfg.lr, cfg.lr_decay, cfg.clip_norm)?;
    let val_on_train = validation.is_empty();
    let val_data = if val_on_train { train_data } else { validation };

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut seconds = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, GruweParams)> = None;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_data.len()).collect();
        RngState::derive(cfg.seed, &[STREAM_ORDER, epoch as u64]).shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut scored = 0usize;
        let mut skipped = 0usize;
        let mut clipped = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let snapshot = &params;
            let results = exec.try_map(batch, |_, &i| {
                let mut rng = RngState::derive(cfg.seed, &[epoch as u64, i as u64]);
                let mut g = Grads::zeros_like(snapshot);
                let l = sequence_grad(train_data, i, snapshot, cfg, &mut rng, Some(&mut g)).map_err(|e| match e {
                    GruweError::Training(m) => GruweError::Training(format!("epoch {epoch}, sequence {i}: {m}")),
                    other => other,
                })?;
                if !l.loss.is_finite() {
                    return Err(GruweError::Training(format!(
                        "epoch {epoch}, sequence {i}: loss is {}",
                        l.loss
                    )));
                }
                Ok((l, g))
            })?;
            // merge in batch order
            let mut total = Grads::zeros_like(&params);
            let mut n = 0usize;
            for (l, g) in &results {
                if l.skipped {
                    skipped += 1;
                    continue;
                }
                total.add_assign(g);
                loss_sum += l.loss;
                n += 1;
            }
            if n == 0 {
                continue;
            }
            scored += n;
            total.scale(1.0 / n as f64);
            if clip_global_norm(&mut total, task, cfg.clip_norm)? < 1.0 {
                clipped += 1;
            }
            opt.adam_step(&mut params, &total, epoch)?;
        }
        let metric = validation_metric(val_data, &params, cfg, &exec)?;
        if !metric.is_finite() {
            return Err(GruweError::Training(format!("epoch {epoch}: validation metric is {metric}")));
        }
        records.push(EpochRecord {
            epoch,
            lr: opt.lr_at(epoch),
            train_loss: if scored > 0 { loss_sum / scored as f64 } else { 0.0 },
            validation_metric: metric,
            skipped_sequences: skipped,
            clipped_steps: clipped,
        });
        seconds.push(started.elapsed().as_secs_f64());
        if best.as_ref().is_none_or(|(_, m, _)| metric < *m) {
            best = Some((epoch, metric, params.clone()));
        }
    }

    let (selected, _, best_params) = best.expect("at least one epoch ran");
    let report = TrainReport {
        format: TRAIN_REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        task,
        seed: cfg.seed,
        validation_metric: match task {
            Task::Forecast => "masked_mse".into(),
            Task::Tpp => "nll_per_sequence".into(),
        },
        validation_on_train: val_on_train,
        epochs: records,
        selected_epoch: selected,
        epoch_seconds: seconds,
    };
    Ok((best_params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{gen_decay_process, gen_poisson_events, DecayProcessConfig, PoissonConfig};
    use crate::data::Standardization;

    fn fc_dims() -> ModelDims {
        ModelDims {
            input_dim: 3,
            hidden_dim: 6,
            output_dim: 3,
        }
    }

    fn series(n: usize, seed: u64) -> Vec<IrregularSeries> {
        let cfg = DecayProcessConfig {
            n_seq: n,
            ..Default::default()
        };
        let (s, _) = gen_decay_process(&mut RngState::new(seed), &cfg).unwrap();
        let st = Standardization::fit(&s, 3);
        s.iter().map(|x| st.apply(x).unwrap()).collect()
    }

    #[test]
    fn zero_lr_keeps_initial_params() {
        let data = series(5, 1);
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 2,
            ..Default::default()
        };
        let init = GruweParams::init(Task::Forecast, fc_dims(), &mut RngState::derive(0, &[STREAM_INIT])).unwrap();
        let (p, _) = train(fc_dims(), TrainData::Series(&data), TrainData::Series(&[]), &cfg).unwrap();
        assert_eq!(p, init);
    }

    #[test]
    fn one_epoch_one_sequence_matches_manual_step() {
        let data = series(1, 2);
        let cfg = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        let (p, _) = train(fc_dims(), TrainData::Series(&data), TrainData::Series(&[]), &cfg).unwrap();

        let mut manual = GruweParams::init(Task::Forecast, fc_dims(), &mut RngState::derive(0, &[STREAM_INIT])).unwrap();
        let mut g = Grads::zeros_like(&manual);
        forecast_loss(&data[0], &manual, &cfg.protocol, Some(&mut g)).unwrap();
        clip_global_norm(&mut g, Task::Forecast, 1.0).unwrap();
        let mut opt = OptimizerState::new(&manual, cfg.lr, cfg.lr_decay, cfg.clip_norm).unwrap();
        opt.adam_step(&mut manual, &g, 0).unwrap();
        assert_eq!(p, manual);
    }

    #[test]
    fn loss_decreases_on_tiny_dataset() {
        let data = series(8, 3);
        let cfg = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let (_, report) = train(fc_dims(), TrainData::Series(&data), TrainData::Series(&[]), &cfg).unwrap();
        let losses: Vec<f64> = report.epochs.iter().map(|e| e.train_loss).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn selected_epoch_is_argmin() {
        let data = series(12, 4);
        let cfg = TrainConfig {
            epochs: 6,
            lr: 0.05,
            ..Default::default()
        };
        let (_, report) = train(fc_dims(), TrainData::Series(&data[..8]), TrainData::Series(&data[8..]), &cfg).unwrap();
        let min = report
            .epochs
            .iter()
            .map(|e| e.validation_metric)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.best().validation_metric, min);
        assert!(!report.validation_on_train);
        assert_eq!(report.epoch_seconds.len(), 6);
    }

    #[test]
    fn deterministic_runs() {
        let data = series(6, 5);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            ..Default::default()
        };
        let a = train(fc_dims(), TrainData::Series(&data), TrainData::Series(&[]), &cfg).unwrap();
        let b = train(fc_dims(), TrainData::Series(&data), TrainData::Series(&[]), &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(
            serde_json::to_string(&a.1).unwrap(),
            serde_json::to_string(&b.1).unwrap()
        );
    }

    #[test]
    fn parallel_accumulation_matches_sequential() {
        let (events, _) = gen_poisson_events(
            &mut RngState::new(9),
            &PoissonConfig {
                n_seq: 16,
                lambda: 0.8,
                t_max: 20.0,
            },
        )
        .unwrap();
        let dims = ModelDims {
            input_dim: 1,
            hidden_dim: 4,
            output_dim: 1,
        };
        let base = TrainConfig {
            epochs: 2,
            batch_size: 8,
            ..Default::default()
        };
        let par = TrainConfig { workers: 4, ..base.clone() };
        let (a, ra) = train(dims, TrainData::Events(&events), TrainData::Events(&[]), &base).unwrap();
        let (b, rb) = train(dims, TrainData::Events(&events), TrainData::Events(&[]), &par).unwrap();
        // merge order is fixed, so the result does not depend on scheduling
        assert_eq!(a, b);
        assert_eq!(ra.epochs, rb.epochs);
    }

    #[test]
    fn config_errors() {
        let data = series(2, 6);
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(
            train(fc_dims(), TrainData::Series(&data), TrainData::Series(&[]), &cfg),
            Err(GruweError::Config(_))
        ));
        assert!(matches!(
            train(fc_dims(), TrainData::Series(&[]), TrainData::Series(&[]), &TrainConfig::default()),
            Err(GruweError::Config(_))
        ));
    }

    #[test]
    fn nan_loss_names_epoch_and_sequence() {
        let data = series(3, 7);
        let mut init = GruweParams::init(Task::Forecast, fc_dims(), &mut RngState::new(1)).unwrap();
        init.value_mut(crate::model::Slot::HeadB).as_mut_slice()[0] = f64::NAN;
        let cfg = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        match train_from(init, TrainData::Series(&data), TrainData::Series(&[]), &cfg) {
            Err(GruweError::Training(m)) => assert!(m.contains("epoch 0") && m.contains("sequence"), "{m}"),
            other => panic!("{other:?}"),
        }
    }
}
