//! The learnable exponential basis `gamma(dt) = exp(-max(0, w * dt + b))`,
//! applied componentwise to the hidden state.
//!
//! Each hidden unit owns a scalar weight and bias. The sign of the weight
//! decides the unit's long-horizon behaviour: positive weights decay the
//! state to zero, a zero weight gives a time-independent factor, negative
//! weights eventually stop decaying altogether.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GruweError, Result};
use crate::numerics::DenseVector;

/// Default half-width of the band around `w = 0` treated as constant decay.
pub const DEFAULT_REGIME_TOL: f64 = 1e-6;

/// Borrowed per-unit decay weights and biases.
#[derive(Debug, Clone, Copy)]
pub struct DecayParams<'a> {
    w_gamma: &'a [f64],
    b_gamma: &'a [f64],
}

impl<'a> DecayParams<'a> {
    pub fn new(w_gamma: &'a [f64], b_gamma: &'a [f64]) -> Result<Self> {
        if w_gamma.len() != b_gamma.len() {
            return Err(GruweError::Shape(format!(
                "decay weight has {} units but bias has {}",
                w_gamma.len(),
                b_gamma.len()
            )));
        }
        Ok(DecayParams { w_gamma, b_gamma })
    }

    pub fn w(&self) -> &'a [f64] {
        self.w_gamma
    }

    pub fn b(&self) -> &'a [f64] {
        self.b_gamma
    }

    pub fn len(&self) -> usize {
        self.w_gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w_gamma.is_empty()
    }

    /// Unchecked evaluation into caller buffers. `active[i]` records whether
    /// the clamp is open (`w*dt + b > 0`), which is all the backward pass needs.
    pub(crate) fn eval_into(&self, dt: f64, gamma: &mut [f64], active: &mut [bool]) {
        for i in 0..self.w_gamma.len() {
            let pre = self.w_gamma[i] * dt + self.b_gamma[i];
            if pre > 0.0 {
                gamma[i] = (-pre).exp();
                active[i] = true;
            } else {
                gamma[i] = 1.0;
                active[i] = false;
            }
        }
    }

    /// Accumulates parameter gradients given `upstream = dL/dgamma`.
    pub(crate) fn backward_acc(
        &self,
        dt: f64,
        gamma: &[f64],
        active: &[bool],
        upstream: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) {
        for i in 0..self.w_gamma.len() {
            if active[i] {
                let d = -upstream[i] * gamma[i];
                grad_w[i] += d * dt;
                grad_b[i] += d;
            }
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(GruweError::Domain(format!(
            "elapsed time must be finite and non-negative, got {dt}"
        )));
    }
    Ok(())
}

/// Componentwise decay factors for elapsed time `dt`; every entry is in `(0, 1]`.
pub fn gamma(params: DecayParams<'_>, dt: f64) -> Result<DenseVector> {
    check_dt(dt)?;
    let mut g = vec![0.0; params.len()];
    let mut active = vec![false; params.len()];
    params.eval_into(dt, &mut g, &mut active);
    Ok(g.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayGrads {
    pub grad_w: DenseVector,
    pub grad_b: DenseVector,
    /// `sum_i upstream_i * d gamma_i / d dt`
    pub grad_dt: f64,
}

/// Reverse-mode derivative of [`gamma`] for an upstream gradient
/// `dL/dgamma`. At the kink (`w*dt + b == 0`) the subgradient 0 is used.
pub fn gamma_backward(params: DecayParams<'_>, dt: f64, upstream: &[f64]) -> Result<DecayGrads> {
    check_dt(dt)?;
    if upstream.len() != params.len() {
        return Err(GruweError::Shape(format!(
            "upstream gradient has length {}, decay has {} units",
            upstream.len(),
            params.len()
        )));
    }
    let n = params.len();
    let mut g = vec![0.0; n];
    let mut active = vec![false; n];
    params.eval_into(dt, &mut g, &mut active);
    let mut grad_w = vec![0.0; n];
    let mut grad_b = vec![0.0; n];
    params.backward_acc(dt, &g, &active, upstream, &mut grad_w, &mut grad_b);
    let grad_dt = (0..n)
        .filter(|&i| active[i])
        .map(|i| -upstream[i] * g[i] * params.w()[i])
        .sum();
    Ok(DecayGrads {
        grad_w: grad_w.into(),
        grad_b: grad_b.into(),
        grad_dt,
    })
}

/// `gamma ⊙ h`
pub fn apply_decay(gamma_vec: &[f64], h: &[f64]) -> Result<DenseVector> {
    if gamma_vec.len() != h.len() {
        return Err(GruweError::Shape(format!(
            "decay vector length {} vs state length {}",
            gamma_vec.len(),
            h.len()
        )));
    }
    Ok(gamma_vec
        .iter()
        .zip(h)
        .map(|(g, x)| g * x)
        .collect::<Vec<_>>()
        .into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayRegime {
    /// `w > 0`: the unit contracts to zero as elapsed time grows.
    StateReset,
    /// `w ≈ 0`: the factor `exp(-max(0, b))` does not depend on elapsed time.
    ConstantDecay,
    /// `w < 0`: the clamp eventually closes and the unit is carried unchanged.
    NoDecay,
}

impl fmt::Display for DecayRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayRegime::StateReset => "state-reset",
            DecayRegime::ConstantDecay => "constant-decay",
            DecayRegime::NoDecay => "no-decay",
        })
    }
}

pub fn classify_regimes(params: DecayParams<'_>, tol: f64) -> Vec<DecayRegime> {
    params
        .w()
        .iter()
        .map(|&w| {
            if w > tol {
                DecayRegime::StateReset
            } else if w < -tol {
                DecayRegime::NoDecay
            } else {
                DecayRegime::ConstantDecay
            }
        })
        .collect()
}

/// Lipschitz constant `w * exp(-b)` of a single unit's decay curve on
/// `[0, inf)`. Only defined for `w > 0`.
pub fn lipschitz_constant(w: f64, b: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(GruweError::Domain(format!(
            "Lipschitz bound requires a positive decay weight, got {w}"
        )));
    }
    Ok(w * (-b).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    fn dp<'a>(w: &'a [f64], b: &'a [f64]) -> DecayParams<'a> {
        DecayParams::new(w, b).unwrap()
    }

    #[test]
    fn gamma_examples() {
        let g = gamma(dp(&[0.5], &[0.0]), 2.0).unwrap();
        assert!((g[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((g[0] - 0.3678794).abs() < 1e-7);

        let p = dp(&[-1.0], &[1.0]);
        assert!((gamma(p, 0.0).unwrap()[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(gamma(p, 2.0).unwrap()[0], 1.0);

        for dt in [0.0, 0.3, 7.0, 1e4] {
            assert_eq!(gamma(dp(&[0.0], &[-1.0]), dt).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn negative_dt_rejected() {
        assert!(matches!(
            gamma(dp(&[1.0], &[0.0]), -0.1),
            Err(GruweError::Domain(_))
        ));
        assert!(gamma_backward(dp(&[1.0], &[0.0]), -1.0, &[1.0]).is_err());
        assert!(gamma(dp(&[1.0], &[0.0]), f64::NAN).is_err());
    }

    #[test]
    fn mismatched_params_rejected() {
        assert!(DecayParams::new(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn backward_examples() {
        let g = gamma_backward(dp(&[-1.0], &[0.0]), 3.0, &[1.0]).unwrap();
        assert_eq!(g.grad_w[0], 0.0);
        assert_eq!(g.grad_b[0], 0.0);
        assert_eq!(g.grad_dt, 0.0);

        let g = gamma_backward(dp(&[0.5], &[0.0]), 2.0, &[1.0]).unwrap();
        let e = (-1.0f64).exp();
        assert!((g.grad_w[0] + 2.0 * e).abs() < 1e-15);
        assert!((g.grad_b[0] + e).abs() < 1e-15);
        assert!((g.grad_dt + 0.5 * e).abs() < 1e-15);
    }

    #[test]
    fn kink_uses_zero_subgradient() {
        // w*dt + b == 0 exactly
        let g = gamma_backward(dp(&[0.5], &[-1.0]), 2.0, &[1.0]).unwrap();
        assert_eq!(g.grad_w[0], 0.0);
        assert_eq!(g.grad_b[0], 0.0);
    }

    #[test]
    fn backward_matches_central_differences() {
        let h = 1e-5;
        for seed in 0..20u64 {
            let mut rng = RngState::new(seed);
            let n = 5;
            let w: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let up: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let dt = rng.uniform_range(0.0, 5.0);
            let loss = |w: &[f64], b: &[f64], dt: f64| -> f64 {
                let g = gamma(dp(w, b), dt).unwrap();
                g.iter().zip(&up).map(|(a, u)| a * u).sum()
            };
            let an = gamma_backward(dp(&w, &b), dt, &up).unwrap();
            let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-12);
            for i in 0..n {
                let pre = w[i] * dt + b[i];
                if pre.abs() < 1e-3 || (w[i] * (dt + h) + b[i]).signum() != pre.signum() {
                    continue;
                }
                let mut wp = w.clone();
                wp[i] += h;
                let mut wm = w.clone();
                wm[i] -= h;
                let fd_w = (loss(&wp, &b, dt) - loss(&wm, &b, dt)) / (2.0 * h);
                assert!(rel(an.grad_w[i], fd_w) < 1e-6, "seed {seed} w[{i}]");

                let mut bp = b.clone();
                bp[i] += h;
                let mut bm = b.clone();
                bm[i] -= h;
                let fd_b = (loss(&w, &bp, dt) - loss(&w, &bm, dt)) / (2.0 * h);
                assert!(rel(an.grad_b[i], fd_b) < 1e-6, "seed {seed} b[{i}]");
            }
            let near_kink = (0..n).any(|i| (w[i] * dt + b[i]).abs() < 1e-3);
            if !near_kink && dt > h {
                let fd_dt = (loss(&w, &b, dt + h) - loss(&w, &b, dt - h)) / (2.0 * h);
                assert!(rel(an.grad_dt, fd_dt) < 1e-6, "seed {seed} dt");
            }
        }
    }

    #[test]
    fn apply_decay_examples() {
        let h = [0.3, -0.7];
        assert_eq!(apply_decay(&[1.0, 1.0], &h).unwrap().as_slice(), &h);
        assert_eq!(apply_decay(&[0.2, 0.9], &[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(
            apply_decay(&[0.5, 1.0], &[-0.4, 0.8]).unwrap().as_slice(),
            &[-0.2, 0.8]
        );
        assert!(apply_decay(&[1.0], &h).is_err());
    }

    #[test]
    fn regimes() {
        use DecayRegime::*;
        assert_eq!(
            classify_regimes(dp(&[1.0, 0.0, -1.0], &[0.0; 3]), 1e-6),
            vec![StateReset, ConstantDecay, NoDecay]
        );
        assert_eq!(classify_regimes(dp(&[5e-7], &[0.0]), 1e-6), vec![ConstantDecay]);
        assert!(classify_regimes(dp(&[0.1, 2.0, 1e-3], &[0.0; 3]), DEFAULT_REGIME_TOL)
            .iter()
            .all(|r| *r == StateReset));
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(lipschitz_constant(1.0, 0.0).unwrap(), 1.0);
        assert!((lipschitz_constant(2.0, 1.0).unwrap() - 0.7357589).abs() < 1e-7);
        assert!((lipschitz_constant(0.5, -1.0).unwrap() - 1.3591409).abs() < 1e-7);
        assert!(lipschitz_constant(0.0, 1.0).is_err());
        assert!(lipschitz_constant(-2.0, 1.0).is_err());
    }

    #[test]
    fn lipschitz_against_difference_quotients() {
        // sampled sup of |gamma(a) - gamma(c)| / |a - c| never exceeds L, and
        // near dt = 0 (clamp open) it approaches L
        let (w, b) = (0.5, -1.0);
        let l = lipschitz_constant(w, b).unwrap();
        let p = [w];
        let q = [b];
        let params = dp(&p, &q);
        let mut rng = RngState::new(3);
        let mut sup: f64 = 0.0;
        for _ in 0..10_000 {
            let a = rng.uniform_range(0.0, 10.0);
            let c = rng.uniform_range(0.0, 10.0);
            if a == c {
                continue;
            }
            let q = (gamma(params, a).unwrap()[0] - gamma(params, c).unwrap()[0]).abs() / (a - c).abs();
            sup = sup.max(q);
        }
        assert!(sup <= l + 1e-12);
        // with b < 0 the clamp is closed until dt = 2, so the slope there is w
        assert!(sup > 0.9 * w);
    }
}
