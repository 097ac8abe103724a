//! State transition: decay the previous state by the elapsed time, then run
//! the masked GRU update on the new observation.
//!
//! ```text
//! g  = gamma(dt) ⊙ h_prev
//! x' = m ⊙ x
//! z  = σ(W_z x' + U_z g + V_z m + b_z)
//! r  = σ(W_r x' + U_r g + V_r m + b_r)
//! h~ = tanh(W_h x' + U_h (r ⊙ g) + V_h m + b_h)
//! h  = (1 - z) ⊙ g + z ⊙ h~
//! ```
//!
//! The mask enters through its own `V` matrices. Feeding `[x', m]` into a
//! plain GRU with stacked input weights is the same computation.

use serde::{Deserialize, Serialize};

use crate::data::IrregularSeries;
use crate::error::{GruweError, Result};
use crate::model::{Grads, GruweParams, Slot};
use crate::numerics::{sigmoid, DenseVector};

/// The model's entire memory of the past.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovState {
    pub h: DenseVector,
    pub last_time: f64,
}

impl MarkovState {
    pub fn initial(hidden_dim: usize, start_time: f64) -> Self {
        MarkovState {
            h: DenseVector::zeros(hidden_dim),
            last_time: start_time,
        }
    }

    /// Bytes held by the state, heap included.
    pub fn byte_size(&self) -> usize {
        std::mem::size_of::<Self>() + self.h.len() * std::mem::size_of::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub dt: f64,
}

impl StepInput {
    pub fn masked(dim: usize, dt: f64) -> Self {
        StepInput {
            x: vec![0.0; dim],
            m: vec![0.0; dim],
            dt,
        }
    }

    /// Event of type `k` among `num_types`: one-hot value, all-ones mask.
    pub fn event(k: usize, num_types: usize, dt: f64) -> Self {
        let mut x = vec![0.0; num_types];
        x[k] = 1.0;
        StepInput {
            x,
            m: vec![1.0; num_types],
            dt,
        }
    }
}

/// Activations of one step kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTape {
    pub dt: f64,
    pub h_prev: Vec<f64>,
    pub x_masked: Vec<f64>,
    pub m: Vec<f64>,
    pub gamma: Vec<f64>,
    pub active: Vec<bool>,
    pub g: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub h: Vec<f64>,
}

fn validate_input(input: &StepInput, params: &GruweParams, h_len: usize) -> Result<()> {
    let dims = params.dims();
    if input.x.len() != dims.input_dim || input.m.len() != dims.input_dim {
        return Err(GruweError::Shape(format!(
            "step input has x of length {} and m of length {}, model expects {}",
            input.x.len(),
            input.m.len(),
            dims.input_dim
        )));
    }
    if h_len != dims.hidden_dim {
        return Err(GruweError::Shape(format!(
            "state has {h_len} units, model expects {}",
            dims.hidden_dim
        )));
    }
    if !(input.dt >= 0.0) || !input.dt.is_finite() {
        return Err(GruweError::Domain(format!(
            "step elapsed time must be finite and non-negative, got {}",
            input.dt
        )));
    }
    Ok(())
}

/// Same arithmetic as [`step`] without validation or bookkeeping.
pub(crate) fn step_tape(h_prev: &[f64], input: &StepInput, params: &GruweParams) -> StepTape {
    let hd = h_prev.len();
    let mut gamma = vec![0.0; hd];
    let mut active = vec![false; hd];
    params.decay().eval_into(input.dt, &mut gamma, &mut active);
    let g: Vec<f64> = gamma.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let x_masked: Vec<f64> = input.x.iter().zip(&input.m).map(|(x, m)| x * m).collect();

    let gate = |w: Slot, u: Slot, v: Slot, b: Slot, rec: &[f64]| -> Vec<f64> {
        let mut a = params.value(b).as_slice().to_vec();
        params.value(w).matvec_acc(&x_masked, &mut a);
        params.value(u).matvec_acc(rec, &mut a);
        params.value(v).matvec_acc(&input.m, &mut a);
        a
    };

    let z: Vec<f64> = gate(Slot::Wz, Slot::Uz, Slot::Vz, Slot::Bz, &g)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = gate(Slot::Wr, Slot::Ur, Slot::Vr, Slot::Br, &g)
        .into_iter()
        .map(sigmoid)
        .collect();
    let rg: Vec<f64> = r.iter().zip(&g).map(|(a, b)| a * b).collect();
    let h_tilde: Vec<f64> = gate(Slot::Wh, Slot::Uh, Slot::Vh, Slot::Bh, &rg)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let h: Vec<f64> = (0..hd)
        .map(|i| (1.0 - z[i]) * g[i] + z[i] * h_tilde[i])
        .collect();

    StepTape {
        dt: input.dt,
        h_prev: h_prev.to_vec(),
        x_masked,
        m: input.m.clone(),
        gamma,
        active,
        g,
        z,
        r,
        h_tilde,
        h,
    }
}

pub fn step(state: &MarkovState, input: &StepInput, params: &GruweParams) -> Result<(MarkovState, StepTape)> {
    validate_input(input, params, state.h.len())?;
    let tape = step_tape(&state.h, input, params);
    let next = MarkovState {
        h: tape.h.clone().into(),
        last_time: state.last_time + input.dt,
    };
    Ok((next, tape))
}

/// Update with nothing observed. Decay and the `V·m` terms still act.
pub fn step_all_masked(state: &MarkovState, dt: f64, params: &GruweParams) -> Result<MarkovState> {
    let input = StepInput::masked(params.dims().input_dim, dt);
    step(state, &input, params).map(|(s, _)| s)
}

/// Continues `state` through the series rows whose time is after
/// `state.last_time`. `dt` for each row is measured from the previous update.
pub fn resume_sequence(
    state: &MarkovState,
    series: &IrregularSeries,
    rows: std::ops::Range<usize>,
    params: &GruweParams,
) -> Result<(Vec<MarkovState>, Vec<StepTape>)> {
    if series.dim() != params.dims().input_dim {
        return Err(GruweError::Shape(format!(
            "series has {} variables, model expects {}",
            series.dim(),
            params.dims().input_dim
        )));
    }
    let mut states = vec![state.clone()];
    let mut tapes = Vec::with_capacity(rows.len());
    let mut current = state.clone();
    for i in rows {
        let t = series.times()[i];
        let dt = t - current.last_time;
        if dt < 0.0 {
            return Err(GruweError::Data(format!(
                "observation at t={t} precedes the state time {}",
                current.last_time
            )));
        }
        let input = StepInput {
            x: series.values().row(i).to_vec(),
            m: series.mask().row(i).to_vec(),
            dt,
        };
        let (mut next, tape) = step(&current, &input, params)?;
        // keep the clock on the observation grid rather than a running sum
        next.last_time = t;
        states.push(next.clone());
        tapes.push(tape);
        current = next;
    }
    Ok((states, tapes))
}

/// Runs the whole series from the zero state anchored at the first
/// timestamp. Returns `len + 1` states (the initial one first) and one tape
/// per observation.
pub fn forward_sequence(series: &IrregularSeries, params: &GruweParams) -> Result<(Vec<MarkovState>, Vec<StepTape>)> {
    let start = series.times().first().copied().unwrap_or(0.0);
    let init = MarkovState::initial(params.dims().hidden_dim, start);
    resume_sequence(&init, series, 0..series.len(), params)
}

/// Reverse-mode through one step. Accumulates parameter gradients into
/// `grads` and returns `dL/dh_prev`.
pub fn step_backward(tape: &StepTape, dh: &[f64], params: &GruweParams, grads: &mut Grads) -> Vec<f64> {
    let hd = tape.h.len();
    let mut dg = vec![0.0; hd];
    let mut da_z = vec![0.0; hd];
    let mut da_h = vec![0.0; hd];
    for i in 0..hd {
        let z = tape.z[i];
        dg[i] = dh[i] * (1.0 - z);
        let dz = dh[i] * (tape.h_tilde[i] - tape.g[i]);
        da_z[i] = dz * z * (1.0 - z);
        let dht = dh[i] * z;
        da_h[i] = dht * (1.0 - tape.h_tilde[i] * tape.h_tilde[i]);
    }

    // candidate
    let rg: Vec<f64> = tape.r.iter().zip(&tape.g).map(|(a, b)| a * b).collect();
    grads.get_mut(Slot::Wh).outer_acc(&da_h, &tape.x_masked);
    grads.get_mut(Slot::Vh).outer_acc(&da_h, &tape.m);
    grads.get_mut(Slot::Uh).outer_acc(&da_h, &rg);
    add_into(grads.get_mut(Slot::Bh).as_mut_slice(), &da_h);
    let mut drg = vec![0.0; hd];
    params.value(Slot::Uh).matvec_t_acc(&da_h, &mut drg);

    let mut da_r = vec![0.0; hd];
    for i in 0..hd {
        dg[i] += drg[i] * tape.r[i];
        let r = tape.r[i];
        da_r[i] = drg[i] * tape.g[i] * r * (1.0 - r);
    }

    for (w, v, u, b, da) in [
        (Slot::Wr, Slot::Vr, Slot::Ur, Slot::Br, &da_r),
        (Slot::Wz, Slot::Vz, Slot::Uz, Slot::Bz, &da_z),
    ] {
        grads.get_mut(w).outer_acc(da, &tape.x_masked);
        grads.get_mut(v).outer_acc(da, &tape.m);
        grads.get_mut(u).outer_acc(da, &tape.g);
        add_into(grads.get_mut(b).as_mut_slice(), da);
        params.value(u).matvec_t_acc(da, &mut dg);
    }

    // g = gamma ⊙ h_prev
    let dgamma: Vec<f64> = dg.iter().zip(&tape.h_prev).map(|(a, b)| a * b).collect();
    let (gw, gb) = grads.pair_mut(Slot::WGamma, Slot::BGamma);
    params.decay().backward_acc(
        tape.dt,
        &tape.gamma,
        &tape.active,
        &dgamma,
        gw.as_mut_slice(),
        gb.as_mut_slice(),
    );
    dg.iter().zip(&tape.gamma).map(|(a, b)| a * b).collect()
}

pub(crate) fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Backpropagation through time. `upstream[t]` is the loss gradient with
/// respect to the state produced by `tapes[t]`. Returns the gradient with
/// respect to the initial state.
pub fn backward_sequence(
    tapes: &[StepTape],
    upstream: &[Vec<f64>],
    params: &GruweParams,
    grads: &mut Grads,
) -> Result<Vec<f64>> {
    let hd = params.dims().hidden_dim;
    if upstream.len() != tapes.len() {
        return Err(GruweError::Shape(format!(
            "{} upstream gradients for {} tapes",
            upstream.len(),
            tapes.len()
        )));
    }
    if let Some(t) = tapes.iter().position(|t| t.h.len() != hd) {
        return Err(GruweError::Shape(format!(
            "tape {t} has {} units, model expects {hd}",
            tapes[t].h.len()
        )));
    }
    if let Some(t) = upstream.iter().position(|u| u.len() != hd) {
        return Err(GruweError::Shape(format!("upstream gradient {t} has wrong length")));
    }
    let mut carry = vec![0.0; hd];
    for (tape, up) in tapes.iter().zip(upstream).rev() {
        add_into(&mut carry, up);
        carry = step_backward(tape, &carry, params, grads);
    }
    Ok(carry)
}
