use crate::error::{GruweError, Result};
use crate::model::{Grads, GruweParams, Slot, Task};
use crate::numerics::DenseMatrix;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Scales `grads` in place so their joint ℓ2 norm is at most `max_norm`.
/// Returns the factor applied (1 when under the threshold).
pub fn clip_global_norm(grads: &mut Grads, task: Task, max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) || !max_norm.is_finite() {
        return Err(GruweError::Config(format!("clip norm must be positive, got {max_norm}")));
    }
    check_finite(grads, task)?;
    let norm = grads.global_norm();
    if norm <= max_norm {
        return Ok(1.0);
    }
    let factor = max_norm / norm;
    grads.scale(factor);
    Ok(factor)
}

fn check_finite(grads: &Grads, task: Task) -> Result<()> {
    for s in Slot::ALL {
        let g = grads.get(s);
        if let Some(i) = g.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(GruweError::Training(format!(
                "non-finite gradient for {} at entry ({}, {}): {}",
                s.name(task),
                i / g.cols(),
                i % g.cols(),
                g.as_slice()[i]
            )));
        }
    }
    Ok(())
}

/// Adam moments plus the schedule. The learning rate for epoch `e` is
/// `lr * lr_decay^e`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
    step: u64,
    pub lr: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
}

impl OptimizerState {
    pub fn new(params: &GruweParams, lr: f64, lr_decay: f64, clip_norm: f64) -> Result<Self> {
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(GruweError::Config(format!("learning rate must be non-negative, got {lr}")));
        }
        if !(lr_decay > 0.0 && lr_decay <= 1.0) {
            return Err(GruweError::Config(format!("lr_decay must lie in (0, 1], got {lr_decay}")));
        }
        if !(clip_norm > 0.0) || !clip_norm.is_finite() {
            return Err(GruweError::Config(format!("clip norm must be positive, got {clip_norm}")));
        }
        let zeros: Vec<DenseMatrix> = params
            .params()
            .iter()
            .map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Ok(OptimizerState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            lr,
            lr_decay,
            clip_norm,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi(epoch as i32)
    }

    /// One bias-corrected Adam update using the epoch's learning rate.
    /// Gradients are expected to be clipped already.
    pub fn adam_step(&mut self, params: &mut GruweParams, grads: &Grads, epoch: usize) -> Result<()> {
        check_finite(grads, params.task())?;
        self.step += 1;
        let lr = self.lr_at(epoch);
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for s in Slot::ALL {
            let i = s.index();
            let g = grads.get(s).as_slice();
            let m = self.m[i].as_mut_slice();
            let v = self.v[i].as_mut_slice();
            let w = params.value_mut(s).as_mut_slice();
            for j in 0..g.len() {
                m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                w[j] -= lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }
}
