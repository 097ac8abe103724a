//! Continuous-time decoding from a Markov state.
//!
//! Both heads first carry the state forward by the prediction horizon with
//! the same decay used between observations, `g = gamma(horizon) ⊙ h`, and
//! then apply a linear map: identity output for forecasting, softplus per
//! event type for the conditional intensity.

use serde::{Deserialize, Serialize};

use crate::cell::{step_backward, step_tape, MarkovState, StepInput, StepTape};
use crate::data::EventSequence;
use crate::decay::DecayParams;
use crate::error::{GruweError, Result};
use crate::model::{Grads, GruweParams, Slot, Task};
use crate::numerics::{sigmoid, softplus, DenseMatrix, DenseVector, RngState};

/// Linear decode `W_out g + b_out`.
#[derive(Debug, Clone, Copy)]
pub struct ForecastHead<'a> {
    pub w_out: &'a DenseMatrix,
    pub b_out: &'a [f64],
}

/// Per-type intensity `softplus(w_lambda[k] · g + b_lambda[k])`.
#[derive(Debug, Clone, Copy)]
pub struct IntensityHead<'a> {
    pub w_lambda: &'a DenseMatrix,
    pub b_lambda: &'a [f64],
}

impl GruweParams {
    pub fn forecast_head(&self) -> Result<ForecastHead<'_>> {
        if self.task() != Task::Forecast {
            return Err(GruweError::Config(format!("model was built for {}, not forecast", self.task())));
        }
        Ok(ForecastHead {
            w_out: self.value(Slot::HeadW),
            b_out: self.value(Slot::HeadB).as_slice(),
        })
    }

    pub fn intensity_head(&self) -> Result<IntensityHead<'_>> {
        if self.task() != Task::Tpp {
            return Err(GruweError::Config(format!("model was built for {}, not tpp", self.task())));
        }
        Ok(IntensityHead {
            w_lambda: self.value(Slot::HeadW),
            b_lambda: self.value(Slot::HeadB).as_slice(),
        })
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(GruweError::Domain(format!(
            "prediction horizon must be finite and non-negative, got {horizon}"
        )));
    }
    Ok(())
}

pub(crate) struct Decayed {
    gamma: Vec<f64>,
    active: Vec<bool>,
    g: Vec<f64>,
}

fn decayed(h: &[f64], horizon: f64, decay: DecayParams<'_>) -> Decayed {
    let n = h.len();
    let mut gamma = vec![0.0; n];
    let mut active = vec![false; n];
    decay.eval_into(horizon, &mut gamma, &mut active);
    let g = gamma.iter().zip(h).map(|(a, b)| a * b).collect();
    Decayed { gamma, active, g }
}

/// Pre-activations `W g + b` of a linear head at `horizon`.
fn linear_decode(h: &[f64], horizon: f64, decay: DecayParams<'_>, w: &DenseMatrix, b: &[f64]) -> (Decayed, Vec<f64>) {
    let d = decayed(h, horizon, decay);
    let mut out = b.to_vec();
    w.matvec_acc(&d.g, &mut out);
    (d, out)
}

fn check_state(state: &MarkovState, decay: DecayParams<'_>, w: &DenseMatrix, b: &[f64]) -> Result<()> {
    if state.h.len() != decay.len() || w.cols() != state.h.len() || w.rows() != b.len() {
        return Err(GruweError::Shape(format!(
            "state of {} units, decay of {}, head {:?} with bias {}",
            state.h.len(),
            decay.len(),
            w.shape(),
            b.len()
        )));
    }
    Ok(())
}

/// Forecast at `state.last_time + horizon`.
pub fn predict_at(state: &MarkovState, horizon: f64, decay: DecayParams<'_>, head: ForecastHead<'_>) -> Result<DenseVector> {
    check_horizon(horizon)?;
    check_state(state, decay, head.w_out, head.b_out)?;
    Ok(linear_decode(&state.h, horizon, decay, head.w_out, head.b_out).1.into())
}

pub fn intensity_at(state: &MarkovState, horizon: f64, decay: DecayParams<'_>, head: IntensityHead<'_>) -> Result<DenseVector> {
    check_horizon(horizon)?;
    check_state(state, decay, head.w_lambda, head.b_lambda)?;
    let (_, pre) = linear_decode(&state.h, horizon, decay, head.w_lambda, head.b_lambda);
    Ok(pre.into_iter().map(softplus).collect::<Vec<_>>().into())
}

pub fn total_intensity_at(state: &MarkovState, horizon: f64, decay: DecayParams<'_>, head: IntensityHead<'_>) -> Result<f64> {
    Ok(intensity_at(state, horizon, decay, head)?.iter().sum())
}

/// Backward through `W (gamma(horizon) ⊙ h) + b` given `dpre`. Accumulates
/// head and decay gradients and adds `dL/dh` into `dh`.
pub(crate) fn head_backward(
    h: &[f64],
    horizon: f64,
    params: &GruweParams,
    dec: &Decayed,
    dpre: &[f64],
    grads: &mut Grads,
    dh: &mut [f64],
) {
    grads.get_mut(Slot::HeadW).outer_acc(dpre, &dec.g);
    crate::cell::add_into(grads.get_mut(Slot::HeadB).as_mut_slice(), dpre);
    let mut dg = vec![0.0; h.len()];
    params.value(Slot::HeadW).matvec_t_acc(dpre, &mut dg);
    let dgamma: Vec<f64> = dg.iter().zip(h).map(|(a, b)| a * b).collect();
    for i in 0..h.len() {
        dh[i] += dg[i] * dec.gamma[i];
    }
    let (gw, gb) = grads.pair_mut(Slot::WGamma, Slot::BGamma);
    params
        .decay()
        .backward_acc(horizon, &dec.gamma, &dec.active, &dgamma, gw.as_mut_slice(), gb.as_mut_slice());
}

/// Pre-activations of the head plus what [`head_backward`] needs.
pub(crate) fn decode(h: &[f64], horizon: f64, params: &GruweParams) -> (Decayed, Vec<f64>) {
    linear_decode(
        h,
        horizon,
        params.decay(),
        params.value(Slot::HeadW),
        params.value(Slot::HeadB).as_slice(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMse {
    pub loss: f64,
    /// `dL/dprediction`, same shape as the inputs.
    pub grads: Vec<Vec<f64>>,
    pub observed: f64,
    /// True when every target entry is masked; loss and gradient are zero.
    pub skipped: bool,
}

/// `sum m (pred - target)^2 / sum m` over all target steps of one sequence.
pub fn masked_mse_loss(predictions: &[Vec<f64>], targets: &[Vec<f64>], masks: &[Vec<f64>]) -> Result<MaskedMse> {
    if predictions.len() != targets.len() || predictions.len() != masks.len() {
        return Err(GruweError::Shape(format!(
            "{} predictions, {} targets, {} masks",
            predictions.len(),
            targets.len(),
            masks.len()
        )));
    }
    for ((p, t), m) in predictions.iter().zip(targets).zip(masks) {
        if p.len() != t.len() || p.len() != m.len() {
            return Err(GruweError::Shape("prediction/target/mask rows differ in length".into()));
        }
        if m.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(GruweError::Data("target mask entries must be 0 or 1".into()));
        }
    }
    let observed: f64 = masks.iter().flatten().sum();
    if observed == 0.0 {
        return Ok(MaskedMse {
            loss: 0.0,
            grads: predictions.iter().map(|p| vec![0.0; p.len()]).collect(),
            observed,
            skipped: true,
        });
    }
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(predictions.len());
    for ((p, t), m) in predictions.iter().zip(targets).zip(masks) {
        let mut row = Vec::with_capacity(p.len());
        for i in 0..p.len() {
            let r = m[i] * (p[i] - t[i]);
            loss += r * r;
            row.push(2.0 * r / observed);
        }
        grads.push(row);
    }
    Ok(MaskedMse {
        loss: loss / observed,
        grads,
        observed,
        skipped: false,
    })
}

/// Uniform fractions in `[0, 1)` per inter-event interval; scaled by the
/// interval length they give the Monte-Carlo sample horizons. Fixed once
/// drawn, so the estimator is a deterministic function of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatorSamples {
    per_interval: Vec<Vec<f64>>,
}

impl CompensatorSamples {
    pub fn draw(rng: &mut RngState, n_intervals: usize, per_interval: usize) -> Result<Self> {
        if per_interval == 0 {
            return Err(GruweError::Config("need at least one Monte-Carlo sample per interval".into()));
        }
        Ok(CompensatorSamples {
            per_interval: (0..n_intervals)
                .map(|_| (0..per_interval).map(|_| rng.uniform()).collect())
                .collect(),
        })
    }

    pub fn from_fractions(per_interval: Vec<Vec<f64>>) -> Result<Self> {
        if per_interval.iter().flatten().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(GruweError::Domain("sample fractions must lie in [0, 1]".into()));
        }
        if per_interval.iter().any(Vec::is_empty) {
            return Err(GruweError::Config("every interval needs at least one sample".into()));
        }
        Ok(CompensatorSamples { per_interval })
    }

    pub fn intervals(&self) -> usize {
        self.per_interval.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensatorEstimate {
    pub value: f64,
    pub sample_count: usize,
    /// Standard error from per-interval sample variances (0 with one sample).
    pub std_error: f64,
    /// Sample horizons per interval, measured from the interval start.
    pub sample_times: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TppLoss {
    pub nll: f64,
    pub log_intensity_sum: f64,
    pub compensator: CompensatorEstimate,
}

impl TppLoss {
    pub fn log_likelihood(&self) -> f64 {
        -self.nll
    }
}

/// Negative log-likelihood of one event sequence with a Monte-Carlo
/// compensator.
///
/// The state before event `j` is the state after event `j-1` (the zero
/// state at time 0 for the first event). Event terms use that state at
/// horizon `t_j - t_{j-1}`. The compensator covers every inter-event
/// interval plus the tail up to `t_max`. When `grads` is given, exact
/// gradients of the returned estimate are accumulated into it.
pub fn tpp_nll(
    seq: &EventSequence,
    params: &GruweParams,
    samples: &CompensatorSamples,
    mut grads: Option<&mut Grads>,
) -> Result<TppLoss> {
    let head = params.intensity_head()?;
    let k = head.b_lambda.len();
    seq.check_types(k)?;
    let n = seq.len();
    if samples.intervals() != n + 1 {
        return Err(GruweError::Shape(format!(
            "{} sample sets for {} intervals",
            samples.intervals(),
            n + 1
        )));
    }
    let hd = params.dims().hidden_dim;
    let decay = params.decay();
    let want_grad = grads.is_some();

    let mut h = vec![0.0; hd];
    let mut tapes: Vec<StepTape> = Vec::with_capacity(n);
    let mut dstate: Vec<Vec<f64>> = if want_grad { vec![vec![0.0; hd]; n + 1] } else { vec![] };
    let mut log_sum = 0.0;
    let mut comp = 0.0;
    let mut var_sum = 0.0;
    let mut sample_times = Vec::with_capacity(n + 1);
    let mut prev = 0.0;

    for j in 0..=n {
        let (end, is_event) = if j < n { (seq.times()[j], true) } else { (seq.t_max(), false) };
        let len = end - prev;
        let fracs = &samples.per_interval[j];
        let m = fracs.len() as f64;

        // compensator samples
        let mut vals = Vec::with_capacity(fracs.len());
        let mut horizons = Vec::with_capacity(fracs.len());
        for &u in fracs {
            let s = u * len;
            horizons.push(s);
            let (dec, pre) = linear_decode(&h, s, decay, head.w_lambda, head.b_lambda);
            let total: f64 = pre.iter().map(|&a| softplus(a)).sum();
            vals.push(total);
            if let Some(g) = grads.as_deref_mut() {
                let dpre: Vec<f64> = pre.iter().map(|&a| sigmoid(a) * len / m).collect();
                head_backward(&h, s, params, &dec, &dpre, g, &mut dstate[j]);
            }
        }
        let mean = vals.iter().sum::<f64>() / m;
        comp += len * mean;
        if vals.len() > 1 {
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
            var_sum += len * len * var / m;
        }
        sample_times.push(horizons);

        if is_event {
            let kind = seq.types()[j];
            let (dec, pre) = linear_decode(&h, len, decay, head.w_lambda, head.b_lambda);
            let a = pre[kind];
            let lam = softplus(a);
            log_sum += lam.ln();
            if let Some(g) = grads.as_deref_mut() {
                let mut dpre = vec![0.0; k];
                dpre[kind] = -sigmoid(a) / lam;
                head_backward(&h, len, params, &dec, &dpre, g, &mut dstate[j]);
            }
            let tape = step_tape(&h, &StepInput::event(kind, k, len), params);
            h = tape.h.clone();
            if want_grad {
                tapes.push(tape);
            }
        }
        prev = end;
    }

    if let Some(g) = grads {
        let mut carry = vec![0.0; hd];
        for j in (0..n).rev() {
            crate::cell::add_into(&mut carry, &dstate[j + 1]);
            carry = step_backward(&tapes[j], &carry, params, g);
        }
    }

    let nll = -log_sum + comp;
    if !nll.is_finite() {
        return Err(GruweError::Training(format!("non-finite point-process likelihood ({nll})")));
    }
    Ok(TppLoss {
        nll,
        log_intensity_sum: log_sum,
        compensator: CompensatorEstimate {
            value: comp,
            sample_count: samples.per_interval.iter().map(Vec::len).sum(),
            std_error: var_sum.sqrt(),
            sample_times,
        },
    })
}

/// [`tpp_nll`] with `mc_samples` fresh uniform draws per interval.
pub fn tpp_nll_mc(
    seq: &EventSequence,
    params: &GruweParams,
    mc_samples: usize,
    rng: &mut RngState,
    grads: Option<&mut Grads>,
) -> Result<TppLoss> {
    let samples = CompensatorSamples::draw(rng, seq.len() + 1, mc_samples)?;
    tpp_nll(seq, params, &samples, grads)
}

/// Expected waiting time to the next event from `state`: trapezoidal
/// quadrature of `s * lambda(s) * exp(-Lambda(s))` on a uniform grid over
/// `[0, max_horizon]`, with the survival mass beyond the grid placed at
/// `max_horizon`.
pub fn predict_next_event_time(state: &MarkovState, params: &GruweParams, max_horizon: f64, grid: usize) -> Result<f64> {
    if !(max_horizon > 0.0) || !max_horizon.is_finite() {
        return Err(GruweError::Config(format!("quadrature horizon must be positive, got {max_horizon}")));
    }
    if grid < 2 {
        return Err(GruweError::Config(format!("quadrature grid needs at least 2 points, got {grid}")));
    }
    let head = params.intensity_head()?;
    let decay = params.decay();
    check_state(state, decay, head.w_lambda, head.b_lambda)?;
    let step = max_horizon / (grid - 1) as f64;
    let mut cum = 0.0;
    let mut prev_lam = 0.0;
    let mut prev_f = 0.0;
    let mut expectation = 0.0;
    for i in 0..grid {
        let s = i as f64 * step;
        let (_, pre) = linear_decode(&state.h, s, decay, head.w_lambda, head.b_lambda);
        let lam: f64 = pre.iter().map(|&a| softplus(a)).sum();
        if i > 0 {
            cum += 0.5 * step * (lam + prev_lam);
        }
        let f = s * lam * (-cum).exp();
        if i > 0 {
            expectation += 0.5 * step * (f + prev_f);
        }
        prev_lam = lam;
        prev_f = f;
    }
    Ok(expectation + max_horizon * (-cum).exp())
}

/// Most intense type at `horizon`; ties go to the lowest index.
pub fn predict_next_event_type(state: &MarkovState, params: &GruweParams, horizon: f64) -> Result<usize> {
    let lam = intensity_at(state, horizon, params.decay(), params.intensity_head()?)?;
    let mut best = 0;
    for k in 1..lam.len() {
        if lam[k] > lam[best] {
            best = k;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinningConfig {
    /// Points of the grid search for the dominating rate.
    pub grid: usize,
    /// Multiplier applied to the grid maximum.
    pub safety: f64,
    /// Skip the search and use this bound (for diagnostics).
    pub fixed_bound: Option<f64>,
}

impl Default for ThinningConfig {
    fn default() -> Self {
        ThinningConfig {
            grid: 64,
            safety: 1.5,
            fixed_bound: None,
        }
    }
}

/// Simulates the model forward from `state` up to absolute time `t_max` by
/// Ogata thinning. Accepted events are fed back through the cell, so the
/// sampled pattern follows the model's own history dependence.
pub fn thinning_sample(
    state: &MarkovState,
    params: &GruweParams,
    rng: &mut RngState,
    t_max: f64,
    cfg: ThinningConfig,
) -> Result<Vec<(f64, usize)>> {
    let head = params.intensity_head()?;
    let k = head.b_lambda.len();
    let decay = params.decay();
    check_state(state, decay, head.w_lambda, head.b_lambda)?;
    let mut current = state.clone();
    let mut t = state.last_time;
    let mut out = Vec::new();
    let total_at = |st: &MarkovState, s: f64| -> (Vec<f64>, f64) {
        let (_, pre) = linear_decode(&st.h, s, decay, head.w_lambda, head.b_lambda);
        let lam: Vec<f64> = pre.into_iter().map(softplus).collect();
        let sum = lam.iter().sum();
        (lam, sum)
    };
    let bound_for = |st: &MarkovState| -> f64 {
        if let Some(b) = cfg.fixed_bound {
            return b;
        }
        let window = (t_max - st.last_time).max(0.0);
        let pts = cfg.grid.max(2);
        let max = (0..pts)
            .map(|i| total_at(st, window * i as f64 / (pts - 1) as f64).1)
            .fold(0.0, f64::max);
        max * cfg.safety
    };
    let mut bound = bound_for(&current);
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(GruweError::Internal(format!("thinning bound {bound} is not a positive rate")));
    }
    loop {
        t += rng.exponential(bound);
        if t > t_max {
            return Ok(out);
        }
        let (lam, total) = total_at(&current, t - current.last_time);
        if total > bound {
            return Err(GruweError::Internal(format!(
                "thinning bound {bound} dominated by intensity {total} at t={t} (state time {})",
                current.last_time
            )));
        }
        if rng.uniform() * bound < total {
            let mut pick = rng.uniform() * total;
            let mut kind = k - 1;
            for (i, &l) in lam.iter().enumerate() {
                if pick < l {
                    kind = i;
                    break;
                }
                pick -= l;
            }
            out.push((t, kind));
            let dt = t - current.last_time;
            let tape = step_tape(&current.h, &StepInput::event(kind, k, dt), params);
            current = MarkovState {
                h: tape.h.into(),
                last_time: t,
            };
            bound = bound_for(&current);
        }
    }
}
