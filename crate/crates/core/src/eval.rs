//! Test-set metrics and the streaming-inference benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cell::{resume_sequence, step, MarkovState, StepInput};
use crate::data::{EventSequence, IrregularSeries};
use crate::error::{GruweError, Result};
use crate::heads::{
    intensity_at, predict_at, predict_next_event_time, predict_next_event_type, tpp_nll, CompensatorSamples,
};
use crate::model::{GruweParams, Task};
use crate::numerics::RngState;
use crate::parallel::Executor;

pub const EVAL_REPORT_FORMAT: &str = "gruwe-eval-report";
pub const BENCH_REPORT_FORMAT: &str = "gruwe-bench-online";
pub const EVAL_REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub mse: f64,
    pub mae: f64,
    pub n_targets: usize,
}

/// One scored target entry, for the optional CSV dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastPoint {
    pub sequence: usize,
    pub row: usize,
    pub variable: usize,
    pub time: f64,
    pub horizon: f64,
    pub prediction: f64,
    pub target: f64,
}

/// Decodes every post-prefix row of every series from its prefix-end state
/// and pools squared and absolute errors over observed entries.
pub fn eval_forecast(
    params: &GruweParams,
    series: &[IrregularSeries],
    observe_fraction: f64,
    exec: &Executor,
) -> Result<(ForecastMetrics, Vec<ForecastPoint>)> {
    let head = params.forecast_head()?;
    let hd = params.dims().hidden_dim;
    let per_seq = exec.try_map(series, |si, s| -> Result<Vec<ForecastPoint>> {
        if s.is_empty() {
            return Ok(vec![]);
        }
        let p = s.prefix_len(observe_fraction);
        let (states, _) = resume_sequence(&MarkovState::initial(hd, s.times()[0]), s, 0..p, params)?;
        let end = &states[p];
        let mut out = Vec::new();
        for row in p..s.len() {
            let hz = s.times()[row] - end.last_time;
            let y = predict_at(end, hz, params.decay(), head)?;
            for v in 0..s.dim() {
                if s.mask().get(row, v) == 1.0 {
                    out.push(ForecastPoint {
                        sequence: si,
                        row,
                        variable: v,
                        time: s.times()[row],
                        horizon: hz,
                        prediction: y[v],
                        target: s.values().get(row, v),
                    });
                }
            }
        }
        Ok(out)
    })?;
    let points: Vec<ForecastPoint> = per_seq.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(GruweError::Evaluation("no observed forecast targets in the evaluation set".into()));
    }
    let n = points.len() as f64;
    let mse = points.iter().map(|p| (p.prediction - p.target).powi(2)).sum::<f64>() / n;
    let mae = points.iter().map(|p| (p.prediction - p.target).abs()).sum::<f64>() / n;
    Ok((
        ForecastMetrics {
            mse,
            mae,
            n_targets: points.len(),
        },
        points,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventMetrics {
    /// Root mean squared error of the predicted waiting time.
    pub rmse_time: f64,
    /// Fraction of events whose most intense type is not the true type.
    pub error_rate: f64,
    /// Mean log-likelihood per sequence (higher is better).
    pub mean_ll: f64,
    pub n_events: usize,
    pub n_sequences: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventPoint {
    pub sequence: usize,
    pub index: usize,
    pub time: f64,
    pub true_gap: f64,
    pub predicted_gap: f64,
    pub true_type: usize,
    pub predicted_type: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventEvalConfig {
    /// Upper limit of the waiting-time quadrature.
    pub max_horizon: f64,
    pub grid: usize,
    pub mc_samples: usize,
    /// Seed of the compensator samples; fixed so reports are reproducible.
    pub seed: u64,
}

pub fn eval_events(
    params: &GruweParams,
    seqs: &[EventSequence],
    cfg: &EventEvalConfig,
    exec: &Executor,
) -> Result<(EventMetrics, Vec<EventPoint>)> {
    if seqs.is_empty() {
        return Err(GruweError::Evaluation("evaluation set is empty".into()));
    }
    let k = params.intensity_head()?.b_lambda.len();
    let hd = params.dims().hidden_dim;
    let per_seq = exec.try_map(seqs, |si, seq| -> Result<(f64, Vec<EventPoint>)> {
        seq.check_types(k)?;
        let mut rng = RngState::derive(cfg.seed, &[si as u64]);
        let samples = CompensatorSamples::draw(&mut rng, seq.len() + 1, cfg.mc_samples)?;
        let ll = tpp_nll(seq, params, &samples, None)?.log_likelihood();
        let mut state = MarkovState::initial(hd, 0.0);
        let mut points = Vec::with_capacity(seq.len());
        for (j, (&t, &kind)) in seq.times().iter().zip(seq.types()).enumerate() {
            let gap = t - state.last_time;
            let predicted_gap = predict_next_event_time(&state, params, cfg.max_horizon, cfg.grid)?;
            let predicted_type = predict_next_event_type(&state, params, gap)?;
            points.push(EventPoint {
                sequence: si,
                index: j,
                time: t,
                true_gap: gap,
                predicted_gap,
                true_type: kind,
                predicted_type,
            });
            let (mut next, _) = step(&state, &StepInput::event(kind, k, gap), params)?;
            next.last_time = t;
            state = next;
        }
        Ok((ll, points))
    })?;
    let mean_ll = per_seq.iter().map(|(ll, _)| ll).sum::<f64>() / seqs.len() as f64;
    let points: Vec<EventPoint> = per_seq.into_iter().flat_map(|(_, p)| p).collect();
    let n = points.len();
    let (rmse_time, error_rate) = if n == 0 {
        (0.0, 0.0)
    } else {
        let se = points.iter().map(|p| (p.predicted_gap - p.true_gap).powi(2)).sum::<f64>();
        let wrong = points.iter().filter(|p| p.predicted_type != p.true_type).count();
        ((se / n as f64).sqrt(), wrong as f64 / n as f64)
    };
    Ok((
        EventMetrics {
            rmse_time,
            error_rate,
            mean_ll,
            n_events: n,
            n_sequences: seqs.len(),
        },
        points,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub split: String,
    pub forecast: Option<ForecastMetrics>,
    pub events: Option<EventMetrics>,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task    {}", self.task);
        let _ = writeln!(s, "split   {}", self.split);
        if let Some(f) = &self.forecast {
            let _ = writeln!(s, "mse     {:.6}", f.mse);
            let _ = writeln!(s, "mae     {:.6}", f.mae);
            let _ = writeln!(s, "targets {}", f.n_targets);
        }
        if let Some(e) = &self.events {
            let _ = writeln!(s, "rmse    {:.6}", e.rmse_time);
            let _ = writeln!(s, "er      {:.6}", e.error_rate);
            let _ = writeln!(s, "mean_ll {:.6}", e.mean_ll);
            let _ = writeln!(s, "events  {}", e.n_events);
            let _ = writeln!(s, "seqs    {}", e.n_sequences);
        }
        s
    }
}

/// Rows of a CSV file with a header taken from the field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let v = serde_json::to_value(row).map_err(|e| GruweError::Internal(e.to_string()))?;
        let obj = v
            .as_object()
            .ok_or_else(|| GruweError::Internal("csv rows must be structs".into()))?;
        if i == 0 {
            out.push_str(&obj.keys().cloned().collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        let cells: Vec<String> = obj.values().map(|c| c.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub median_ns: f64,
    pub p90_ns: f64,
    pub max_ns: f64,
}

impl LatencyStats {
    fn from_samples(ns: &mut [f64]) -> Self {
        if ns.is_empty() {
            return LatencyStats {
                count: 0,
                median_ns: 0.0,
                p90_ns: 0.0,
                max_ns: 0.0,
            };
        }
        ns.sort_by(f64::total_cmp);
        let q = |p: f64| ns[((ns.len() - 1) as f64 * p).round() as usize];
        LatencyStats {
            count: ns.len(),
            median_ns: q(0.5),
            p90_ns: q(0.9),
            max_ns: ns[ns.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileReport {
    pub decile: usize,
    /// History length (steps already processed) at the decile start.
    pub history_start: usize,
    pub update: LatencyStats,
    pub predict: LatencyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineBenchReport {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub steps: usize,
    pub warmup: usize,
    pub predict_every: usize,
    pub state_bytes: usize,
    pub state_bytes_constant: bool,
    pub deciles: Vec<DecileReport>,
    /// Median update latency of the last decile over the first.
    pub update_latency_ratio: f64,
    pub params_unchanged: bool,
}

/// Feeds `stream` through the cell one observation at a time, decoding
/// every `predict_every` updates, and times each operation. The first
/// `warmup` steps are run but not recorded.
pub fn bench_online(
    params: &GruweParams,
    stream: &[StepInput],
    predict_every: usize,
    warmup: usize,
) -> Result<OnlineBenchReport> {
    if predict_every == 0 {
        return Err(GruweError::Config("predict_every must be at least 1".into()));
    }
    if stream.len() < warmup + 10 {
        return Err(GruweError::Config(format!(
            "stream of {} steps is too short for {warmup} warm-up steps and 10 deciles",
            stream.len()
        )));
    }
    let checksum = params.checksum();
    let mut state = MarkovState::initial(params.dims().hidden_dim, 0.0);
    let bytes = state.byte_size();
    let mut constant = true;
    let measured = stream.len() - warmup;
    let mut update_ns = Vec::with_capacity(measured);
    let mut predict_ns: Vec<(usize, f64)> = Vec::new();
    let mut sink = 0.0;
    for (i, input) in stream.iter().enumerate() {
        let t0 = Instant::now();
        let (next, _) = step(&state, input, params)?;
        let dt = t0.elapsed().as_nanos() as f64;
        state = next;
        if state.byte_size() != bytes {
            constant = false;
        }
        if i >= warmup {
            update_ns.push(dt);
        }
        if (i + 1) % predict_every == 0 {
            let t0 = Instant::now();
            let y = match params.task() {
                Task::Forecast => predict_at(&state, 1.0, params.decay(), params.forecast_head()?)?,
                Task::Tpp => intensity_at(&state, 1.0, params.decay(), params.intensity_head()?)?,
            };
            let dt = t0.elapsed().as_nanos() as f64;
            sink += y[0];
            if i >= warmup {
                predict_ns.push((i - warmup, dt));
            }
        }
    }
    std::hint::black_box(sink);

    let mut deciles = Vec::with_capacity(10);
    for d in 0..10 {
        let lo = measured * d / 10;
        let hi = measured * (d + 1) / 10;
        let mut u = update_ns[lo..hi].to_vec();
        let mut p: Vec<f64> = predict_ns
            .iter()
            .filter(|(i, _)| (lo..hi).contains(i))
            .map(|&(_, ns)| ns)
            .collect();
        deciles.push(DecileReport {
            decile: d,
            history_start: warmup + lo,
            update: LatencyStats::from_samples(&mut u),
            predict: LatencyStats::from_samples(&mut p),
        });
    }
    let first = deciles[0].update.median_ns;
    let last = deciles[9].update.median_ns;
    Ok(OnlineBenchReport {
        format: BENCH_REPORT_FORMAT.into(),
        version: EVAL_REPORT_VERSION,
        task: params.task(),
        steps: stream.len(),
        warmup,
        predict_every,
        state_bytes: bytes,
        state_bytes_constant: constant,
        deciles,
        update_latency_ratio: if first > 0.0 { last / first } else { 1.0 },
        params_unchanged: params.checksum() == checksum,
    })
}

/// A synthetic observation stream for [`bench_online`]: unit-rate exponential
/// gaps, uniform values each observed with probability 0.7
/// (forecast), or uniformly drawn event types (tpp).
pub fn synthetic_stream(params: &GruweParams, steps: usize, seed: u64) -> Vec<StepInput> {
    let mut rng = RngState::new(seed);
    let d = params.dims().input_dim;
    (0..steps)
        .map(|_| {
            let dt = rng.exponential(1.0);
            match params.task() {
                Task::Forecast => {
                    let m: Vec<f64> = (0..d).map(|_| if rng.bernoulli(0.7) { 1.0 } else { 0.0 }).collect();
                    let x = m.iter().map(|mi| mi * rng.uniform_range(-2.0, 2.0)).collect();
                    StepInput { x, m, dt }
                }
                Task::Tpp => StepInput::event(rng.below(d), d, dt),
            }
        })
        .collect()
}

/// Stream built from the rows of a series collection, one after another.
pub fn series_stream(series: &[IrregularSeries]) -> Vec<StepInput> {
    let mut out = Vec::new();
    for s in series {
        let mut prev = s.times().first().copied().unwrap_or(0.0);
        for r in 0..s.len() {
            out.push(StepInput {
                x: s.values().row(r).to_vec(),
                m: s.mask().row(r).to_vec(),
                dt: s.times()[r] - prev,
            });
            prev = s.times()[r];
        }
    }
    out
}
