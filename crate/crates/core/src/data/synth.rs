//! Synthetic generators with closed-form ground truth.
//!
//! All generators are pure functions of the supplied [`RngState`] and config.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{EventSequence, IrregularSeries};
use crate::error::{GruweError, Result};
use crate::numerics::{DenseMatrix, RngState};

/// Damped sinusoids `a * exp(-kappa t) * sin(omega t + phi)` observed at
/// Poisson times on `[0, t_max]`, each variable dropped independently with
/// probability `p_miss`. Per-sequence parameters are drawn uniformly from
/// the given ranges; the amplitude sign is random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayProcessConfig {
    pub n_seq: usize,
    pub dim: usize,
    pub rate: f64,
    pub t_max: f64,
    pub p_miss: f64,
    pub amplitude: (f64, f64),
    pub kappa: (f64, f64),
    pub omega: (f64, f64),
}

impl Default for DecayProcessConfig {
    fn default() -> Self {
        DecayProcessConfig {
            n_seq: 100,
            dim: 3,
            rate: 2.0,
            t_max: 10.0,
            p_miss: 0.3,
            amplitude: (0.5, 2.0),
            kappa: (0.05, 0.3),
            omega: (0.1, 0.4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTruth {
    pub amplitude: Vec<f64>,
    pub kappa: Vec<f64>,
    pub omega: Vec<f64>,
    pub phase: Vec<f64>,
}

impl DecayTruth {
    pub fn value(&self, var: usize, t: f64) -> f64 {
        self.amplitude[var] * (-self.kappa[var] * t).exp() * (self.omega[var] * t + self.phase[var]).sin()
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if !(lo >= min) || !(hi >= lo) || !hi.is_finite() {
        return Err(GruweError::Config(format!(
            "{name} range ({lo}, {hi}) must satisfy {min} <= lo <= hi < inf"
        )));
    }
    Ok(())
}

impl DecayProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(GruweError::Config("decay process needs dim >= 1".into()));
        }
        if !(self.rate > 0.0) || !(self.t_max > 0.0) || !self.rate.is_finite() || !self.t_max.is_finite() {
            return Err(GruweError::Config(format!(
                "rate ({}) and t_max ({}) must be positive and finite",
                self.rate, self.t_max
            )));
        }
        if !(0.0..1.0).contains(&self.p_miss) {
            return Err(GruweError::Config(format!("p_miss must lie in [0, 1), got {}", self.p_miss)));
        }
        check_range("amplitude", self.amplitude, 0.0)?;
        check_range("kappa", self.kappa, 0.0)?;
        check_range("omega", self.omega, 0.0)?;
        Ok(())
    }
}

/// Homogeneous Poisson arrival times on `(0, t_max]`; a zero-length gap is
/// re-drawn.
fn poisson_times(rng: &mut RngState, rate: f64, t_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let gap = rng.exponential(rate);
        if gap <= 0.0 {
            continue;
        }
        t += gap;
        if t > t_max {
            return out;
        }
        out.push(t);
    }
}

pub fn gen_decay_process(rng: &mut RngState, cfg: &DecayProcessConfig) -> Result<(Vec<IrregularSeries>, Vec<DecayTruth>)> {
    cfg.validate()?;
    let mut series = Vec::with_capacity(cfg.n_seq);
    let mut truths = Vec::with_capacity(cfg.n_seq);
    for _ in 0..cfg.n_seq {
        let d = cfg.dim;
        let truth = DecayTruth {
            amplitude: (0..d)
                .map(|_| {
                    let a = rng.uniform_range(cfg.amplitude.0, cfg.amplitude.1);
                    if rng.bernoulli(0.5) {
                        -a
                    } else {
                        a
                    }
                })
                .collect(),
            kappa: (0..d).map(|_| rng.uniform_range(cfg.kappa.0, cfg.kappa.1)).collect(),
            omega: (0..d).map(|_| rng.uniform_range(cfg.omega.0, cfg.omega.1)).collect(),
            phase: (0..d).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect(),
        };
        // at least two observations so a prefix and a target can exist
        let times = loop {
            let t = poisson_times(rng, cfg.rate, cfg.t_max);
            if t.len() >= 2 {
                break t;
            }
        };
        let n = times.len();
        let mut values = Vec::with_capacity(n * d);
        let mut mask = Vec::with_capacity(n * d);
        for &t in &times {
            for v in 0..d {
                let observed = !rng.bernoulli(cfg.p_miss);
                mask.push(if observed { 1.0 } else { 0.0 });
                values.push(if observed { truth.value(v, t) } else { 0.0 });
            }
        }
        series.push(IrregularSeries::new(
            times,
            DenseMatrix::checked(n, d, values)?,
            DenseMatrix::checked(n, d, mask)?,
        )?);
        truths.push(truth);
    }
    Ok((series, truths))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonConfig {
    pub n_seq: usize,
    pub lambda: f64,
    pub t_max: f64,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            n_seq: 500,
            lambda: 0.8,
            t_max: 50.0,
        }
    }
}

/// Single-type homogeneous Poisson realizations plus each sequence's
/// log-likelihood under the generating rate, `n log(lambda) - lambda T`.
pub fn gen_poisson_events(rng: &mut RngState, cfg: &PoissonConfig) -> Result<(Vec<EventSequence>, Vec<f64>)> {
    if !(cfg.lambda > 0.0) || !cfg.lambda.is_finite() {
        return Err(GruweError::Config(format!("Poisson rate must be positive, got {}", cfg.lambda)));
    }
    if !(cfg.t_max > 0.0) || !cfg.t_max.is_finite() {
        return Err(GruweError::Config(format!("t_max must be positive, got {}", cfg.t_max)));
    }
    let mut seqs = Vec::with_capacity(cfg.n_seq);
    let mut lls = Vec::with_capacity(cfg.n_seq);
    for _ in 0..cfg.n_seq {
        let times = poisson_times(rng, cfg.lambda, cfg.t_max);
        let n = times.len();
        let seq = EventSequence::new(times, vec![0; n], cfg.t_max)?;
        lls.push(poisson_log_likelihood(&seq, cfg.lambda));
        seqs.push(seq);
    }
    Ok((seqs, lls))
}

pub fn poisson_log_likelihood(seq: &EventSequence, lambda: f64) -> f64 {
    seq.len() as f64 * lambda.ln() - lambda * seq.t_max()
}

/// Mean per-sequence log-likelihood of a marked homogeneous Poisson model
/// whose per-type rates are the maximum-likelihood fit to `seqs` themselves.
pub fn pooled_poisson_mle_log_likelihood(seqs: &[EventSequence], num_types: usize) -> f64 {
    if seqs.is_empty() {
        return 0.0;
    }
    let exposure: f64 = seqs.iter().map(EventSequence::t_max).sum();
    let mut counts = vec![0usize; num_types];
    for s in seqs {
        for &k in s.types() {
            counts[k] += 1;
        }
    }
    let total: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let rate = c as f64 / exposure;
            c as f64 * rate.ln() - rate * exposure
        })
        .sum();
    total / seqs.len() as f64
}

/// Per-sequence homogeneous Poisson MLE log-likelihood (`rate = n / T`).
pub fn poisson_mle_log_likelihood(seq: &EventSequence) -> f64 {
    let n = seq.len() as f64;
    if n == 0.0 {
        0.0
    } else {
        n * (n / seq.t_max()).ln() - n
    }
}

/// Exponential-kernel Hawkes process: the ground intensity is
/// `mu + alpha * sum_j exp(-beta (t - t_j))` and each event's type is
/// uniform over `num_types`, so `alpha / beta < 1` is the stability condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HawkesConfig {
    pub n_seq: usize,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t_max: f64,
    pub num_types: usize,
}

impl Default for HawkesConfig {
    fn default() -> Self {
        HawkesConfig {
            n_seq: 400,
            mu: 0.2,
            alpha: 0.8,
            beta: 1.0,
            t_max: 50.0,
            num_types: 1,
        }
    }
}

impl HawkesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.beta > 0.0) || !(self.alpha >= 0.0) || !(self.t_max > 0.0) {
            return Err(GruweError::Config(format!(
                "Hawkes parameters need mu > 0, alpha >= 0, beta > 0, t_max > 0 (got {self:?})"
            )));
        }
        if !(self.alpha / self.beta < 1.0) {
            return Err(GruweError::Config(format!(
                "unstable Hawkes process: alpha/beta = {} >= 1",
                self.alpha / self.beta
            )));
        }
        if self.num_types == 0 {
            return Err(GruweError::Config("num_types must be at least 1".into()));
        }
        Ok(())
    }
}

/// Ogata thinning. Between events the exponential-kernel intensity only
/// decreases, so the intensity right after the current time bounds it.
pub fn gen_hawkes_events(rng: &mut RngState, cfg: &HawkesConfig) -> Result<(Vec<EventSequence>, Vec<f64>)> {
    cfg.validate()?;
    let mut seqs = Vec::with_capacity(cfg.n_seq);
    let mut lls = Vec::with_capacity(cfg.n_seq);
    for _ in 0..cfg.n_seq {
        let mut times = Vec::new();
        let mut types = Vec::new();
        let mut t = 0.0;
        let mut excitation = 0.0;
        loop {
            let bound = cfg.mu + cfg.alpha * excitation;
            let gap = rng.exponential(bound);
            if gap <= 0.0 {
                continue;
            }
            excitation *= (-cfg.beta * gap).exp();
            t += gap;
            if t > cfg.t_max {
                break;
            }
            let lambda = cfg.mu + cfg.alpha * excitation;
            if rng.uniform() * bound <= lambda {
                times.push(t);
                types.push(rng.below(cfg.num_types));
                excitation += 1.0;
            }
        }
        let seq = EventSequence::new(times, types, cfg.t_max)?;
        lls.push(hawkes_log_likelihood(&seq, cfg));
        seqs.push(seq);
    }
    Ok((seqs, lls))
}

/// Exact log-likelihood under the exponential-kernel model, via the
/// recursion `A_j = exp(-beta (t_j - t_{j-1})) (1 + A_{j-1})`.
pub fn hawkes_log_likelihood(seq: &EventSequence, cfg: &HawkesConfig) -> f64 {
    let (mu, alpha, beta) = (cfg.mu, cfg.alpha, cfg.beta);
    let mut ll = 0.0;
    let mut a = 0.0;
    let mut prev: Option<f64> = None;
    for &t in seq.times() {
        if let Some(p) = prev {
            a = (-beta * (t - p)).exp() * (1.0 + a);
        }
        ll += (mu + alpha * a).ln();
        prev = Some(t);
    }
    ll -= seq.len() as f64 * (cfg.num_types as f64).ln();
    let tail: f64 = seq
        .times()
        .iter()
        .map(|&t| 1.0 - (-beta * (seq.t_max() - t)).exp())
        .sum();
    ll - mu * seq.t_max() - alpha / beta * tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_missingness_gives_full_masks() {
        let cfg = DecayProcessConfig {
            p_miss: 0.0,
            n_seq: 10,
            ..Default::default()
        };
        let (s, _) = gen_decay_process(&mut RngState::new(1), &cfg).unwrap();
        assert!(s.iter().all(|x| x.mask().as_slice().iter().all(|&m| m == 1.0)));
    }

    #[test]
    fn decay_generator_is_deterministic_and_exact() {
        let cfg = DecayProcessConfig {
            n_seq: 5,
            ..Default::default()
        };
        let (a, ta) = gen_decay_process(&mut RngState::new(3), &cfg).unwrap();
        let (b, tb) = gen_decay_process(&mut RngState::new(3), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        for (s, t) in a.iter().zip(&ta) {
            for r in 0..s.len() {
                for c in 0..s.dim() {
                    if s.mask().get(r, c) == 1.0 {
                        assert_eq!(s.values().get(r, c), t.value(c, s.times()[r]));
                    }
                }
            }
        }
    }

    #[test]
    fn negative_kappa_rejected() {
        let cfg = DecayProcessConfig {
            kappa: (-0.1, 0.2),
            ..Default::default()
        };
        assert!(matches!(
            gen_decay_process(&mut RngState::new(1), &cfg),
            Err(GruweError::Config(_))
        ));
    }

    #[test]
    fn inter_arrival_mean_matches_rate() {
        let mut rng = RngState::new(17);
        let rate = 2.5;
        let times = poisson_times(&mut rng, rate, 40_000.0);
        assert!(times.len() > 100_000 - 5000);
        let gaps: Vec<f64> = std::iter::once(times[0])
            .chain(times.windows(2).map(|w| w[1] - w[0]))
            .take(100_000)
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!((mean * rate - 1.0).abs() < 0.02, "mean gap {mean}");
    }

    #[test]
    fn poisson_generator() {
        let bad = PoissonConfig {
            lambda: 0.0,
            ..Default::default()
        };
        assert!(gen_poisson_events(&mut RngState::new(1), &bad).is_err());

        let cfg = PoissonConfig {
            n_seq: 10_000,
            lambda: 0.8,
            t_max: 50.0,
        };
        let (seqs, _) = gen_poisson_events(&mut RngState::new(5), &cfg).unwrap();
        let mean = seqs.iter().map(|s| s.len() as f64).sum::<f64>() / seqs.len() as f64;
        let expect = 40.0;
        let se = (expect / seqs.len() as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean count {mean}");
    }

    #[test]
    fn poisson_oracle_ll() {
        let seq = EventSequence::new(vec![0.5, 1.5], vec![0, 0], 2.0).unwrap();
        assert_eq!(poisson_log_likelihood(&seq, 1.0), -2.0);
    }

    #[test]
    fn hawkes_validation() {
        let cfg = HawkesConfig {
            alpha: 1.2,
            ..Default::default()
        };
        assert!(gen_hawkes_events(&mut RngState::new(1), &cfg).is_err());
    }

    #[test]
    fn hawkes_without_excitation_is_poisson() {
        let cfg = HawkesConfig {
            n_seq: 2000,
            mu: 0.6,
            alpha: 0.0,
            t_max: 20.0,
            ..Default::default()
        };
        let (seqs, lls) = gen_hawkes_events(&mut RngState::new(8), &cfg).unwrap();
        let mean = seqs.iter().map(|s| s.len() as f64).sum::<f64>() / seqs.len() as f64;
        let se = (12.0 / 2000f64).sqrt();
        assert!((mean - 12.0).abs() < 3.0 * se, "mean count {mean}");
        for (s, ll) in seqs.iter().zip(lls) {
            assert!((ll - poisson_log_likelihood(s, 0.6)).abs() < 1e-9);
        }
    }

    #[test]
    fn hawkes_deterministic() {
        let cfg = HawkesConfig {
            n_seq: 20,
            num_types: 3,
            ..Default::default()
        };
        let a = gen_hawkes_events(&mut RngState::new(4), &cfg).unwrap();
        let b = gen_hawkes_events(&mut RngState::new(4), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.0.iter().flat_map(|s| s.types()).all(|&k| k < 3));
    }

    /// The generator's own likelihood beats the per-sequence Poisson fit on
    /// average.
    #[test]
    fn hawkes_truth_dominates_poisson_fit() {
        let cfg = HawkesConfig {
            n_seq: 1000,
            ..Default::default()
        };
        let (seqs, lls) = gen_hawkes_events(&mut RngState::new(12), &cfg).unwrap();
        let truth = lls.iter().sum::<f64>() / 1000.0;
        let mle = seqs.iter().map(poisson_mle_log_likelihood).sum::<f64>() / 1000.0;
        assert!(truth > mle, "truth {truth} vs poisson mle {mle}");
    }

    /// Closed-form likelihood against brute-force numerical integration of
    /// the intensity.
    #[test]
    fn hawkes_ll_matches_quadrature() {
        let cfg = HawkesConfig {
            n_seq: 1,
            mu: 0.3,
            alpha: 0.5,
            beta: 1.3,
            t_max: 6.0,
            num_types: 1,
        };
        let seq = EventSequence::new(vec![0.4, 1.1, 1.3, 4.0], vec![0; 4], 6.0).unwrap();
        let lambda = |t: f64| {
            cfg.mu
                + seq
                    .times()
                    .iter()
                    .filter(|&&s| s < t)
                    .map(|&s| cfg.alpha * (-cfg.beta * (t - s)).exp())
                    .sum::<f64>()
        };
        let n = 600_000;
        let h = cfg.t_max / n as f64;
        let integral: f64 = (0..n).map(|i| lambda((i as f64 + 0.5) * h) * h).sum();
        let events: f64 = seq.times().iter().map(|&t| lambda(t).ln()).sum();
        let brute = events - integral;
        assert!((hawkes_log_likelihood(&seq, &cfg) - brute).abs() < 1e-6);
    }

    #[test]
    fn pooled_mle() {
        let a = EventSequence::new(vec![1.0, 2.0], vec![0, 0], 4.0).unwrap();
        let b = EventSequence::new(vec![], vec![], 4.0).unwrap();
        // rate 2/8, mean over two sequences of total 2 ln(0.25) - 2
        let expect = (2.0 * 0.25f64.ln() - 2.0) / 2.0;
        assert!((pooled_poisson_mle_log_likelihood(&[a, b], 1) - expect).abs() < 1e-12);
    }
}
