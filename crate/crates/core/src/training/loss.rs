//! Per-sequence losses with optional gradient accumulation.

use serde::{Deserialize, Serialize};

use crate::cell::{backward_sequence, resume_sequence, MarkovState};
use crate::data::{EventSequence, IrregularSeries};
use crate::error::{GruweError, Result};
use crate::heads::{decode, head_backward, masked_mse_loss, tpp_nll, CompensatorSamples};
use crate::model::{Grads, GruweParams, Task};
use crate::numerics::RngState;

/// How a series is split into conditioning context and prediction targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastProtocol {
    /// Fraction of the time window observed before predicting.
    pub observe_fraction: f64,
    /// Also score one-step-ahead predictions inside the observed prefix.
    pub prefix_loss: bool,
}

impl Default for ForecastProtocol {
    fn default() -> Self {
        ForecastProtocol {
            observe_fraction: 0.5,
            prefix_loss: false,
        }
    }
}

impl ForecastProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.observe_fraction) {
            return Err(GruweError::Config(format!(
                "observe_fraction must lie in [0, 1], got {}",
                self.observe_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqLoss {
    pub loss: f64,
    /// Number of scored scalar targets (forecast) or events (tpp).
    pub targets: f64,
    /// Nothing to score; contributes no gradient.
    pub skipped: bool,
}

/// Forecast loss for one series: run the cell over the observed prefix,
/// then decode every later row from the prefix-end state at horizon
/// `t - t_last` and score the observed entries with masked MSE.
pub fn forecast_loss(
    series: &IrregularSeries,
    params: &GruweParams,
    protocol: &ForecastProtocol,
    grads: Option<&mut Grads>,
) -> Result<SeqLoss> {
    if params.task() != Task::Forecast {
        return Err(GruweError::Config("forecast loss needs a forecast model".into()));
    }
    if series.is_empty() {
        return Ok(SeqLoss {
            loss: 0.0,
            targets: 0.0,
            skipped: true,
        });
    }
    let hd = params.dims().hidden_dim;
    let p = series.prefix_len(protocol.observe_fraction);
    let init = MarkovState::initial(hd, series.times()[0]);
    let (states, tapes) = resume_sequence(&init, series, 0..p, params)?;
    let end = &states[p];
    let times = series.times();

    let rows = |range: std::ops::Range<usize>| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        range
            .map(|i| (series.values().row(i).to_vec(), series.mask().row(i).to_vec()))
            .unzip()
    };

    // targets after the prefix, all from the prefix-end state
    let mut target_decodes = Vec::new();
    let mut preds = Vec::new();
    for &t in &times[p..] {
        let hz = t - end.last_time;
        let (dec, pre) = decode(&end.h, hz, params);
        target_decodes.push((hz, dec));
        preds.push(pre);
    }
    let (targets, masks) = rows(p..series.len());
    let main = masked_mse_loss(&preds, &targets, &masks)?;

    // one-step-ahead inside the prefix: state after row i-1 predicts row i
    let mut aux_decodes = Vec::new();
    let mut aux = None;
    if protocol.prefix_loss && p > 1 {
        let mut aux_preds = Vec::new();
        for i in 1..p {
            let hz = times[i] - times[i - 1];
            let (dec, pre) = decode(&states[i].h, hz, params);
            aux_decodes.push((hz, dec));
            aux_preds.push(pre);
        }
        let (t, m) = rows(1..p);
        aux = Some(masked_mse_loss(&aux_preds, &t, &m)?);
    }

    let aux_active = aux.as_ref().is_some_and(|a| !a.skipped);
    if main.skipped && !aux_active {
        return Ok(SeqLoss {
            loss: 0.0,
            targets: 0.0,
            skipped: true,
        });
    }
    let loss = main.loss + aux.as_ref().map_or(0.0, |a| a.loss);
    if !loss.is_finite() {
        return Err(GruweError::Training(format!("non-finite forecast loss ({loss})")));
    }

    if let Some(g) = grads {
        let mut upstream = vec![vec![0.0; hd]; p];
        if !main.skipped {
            let last = upstream.last_mut().expect("prefix has at least one row");
            for ((hz, dec), dp) in target_decodes.iter().zip(&main.grads) {
                head_backward(&end.h, *hz, params, dec, dp, g, last);
            }
        }
        if let Some(a) = aux.as_ref().filter(|a| !a.skipped) {
            for (i, ((hz, dec), dp)) in aux_decodes.iter().zip(&a.grads).enumerate() {
                // states[i + 1] is produced by tapes[i]
                head_backward(&states[i + 1].h, *hz, params, dec, dp, g, &mut upstream[i]);
            }
        }
        backward_sequence(&tapes, &upstream, params, g)?;
    }
    Ok(SeqLoss {
        loss,
        targets: main.observed + aux.map_or(0.0, |a| a.observed),
        skipped: false,
    })
}

/// Point-process NLL of one sequence with freshly drawn compensator samples.
pub fn event_loss(
    seq: &EventSequence,
    params: &GruweParams,
    mc_samples: usize,
    rng: &mut RngState,
    grads: Option<&mut Grads>,
) -> Result<SeqLoss> {
    let samples = CompensatorSamples::draw(rng, seq.len() + 1, mc_samples)?;
    let out = tpp_nll(seq, params, &samples, grads)?;
    Ok(SeqLoss {
        loss: out.nll,
        targets: seq.len() as f64,
        skipped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests_support::random_series;
    use crate::model::{ModelDims, Slot};

    fn model(d: usize, h: usize, seed: u64) -> GruweParams {
        let dims = ModelDims {
            input_dim: d,
            hidden_dim: h,
            output_dim: d,
        };
        let mut p = GruweParams::zeros(Task::Forecast, dims).unwrap();
        let mut rng = RngState::new(seed);
        for s in Slot::ALL {
            for v in p.value_mut(s).as_mut_slice() {
                *v = rng.uniform_range(-0.8, 0.8);
            }
        }
        p
    }

    fn fd_check(series: &IrregularSeries, protocol: ForecastProtocol, seed: u64) {
        let mut p = model(series.dim(), 4, seed);
        let mut g = Grads::zeros_like(&p);
        forecast_loss(series, &p, &protocol, Some(&mut g)).unwrap();
        let eps = 1e-5;
        for s in Slot::ALL {
            for j in 0..p.value(s).as_slice().len() {
                let orig = p.value(s).as_slice()[j];
                p.value_mut(s).as_mut_slice()[j] = orig + eps;
                let up = forecast_loss(series, &p, &protocol, None).unwrap().loss;
                p.value_mut(s).as_mut_slice()[j] = orig - eps;
                let dn = forecast_loss(series, &p, &protocol, None).unwrap().loss;
                p.value_mut(s).as_mut_slice()[j] = orig;
                let num = (up - dn) / (2.0 * eps);
                let ana = g.get(s).as_slice()[j];
                let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-6);
                assert!(rel < 1e-4, "{} [{j}]: analytic {ana} numeric {num}", s.name(Task::Forecast));
            }
        }
    }

    #[test]
    fn forecast_gradients_match_finite_differences() {
        for seed in 0..4 {
            let series = random_series(3, 12, 100 + seed);
            fd_check(&series, ForecastProtocol::default(), seed);
        }
    }

    #[test]
    fn prefix_loss_gradients_match_finite_differences() {
        let protocol = ForecastProtocol {
            observe_fraction: 0.5,
            prefix_loss: true,
        };
        for seed in 0..3 {
            let series = random_series(2, 10, 200 + seed);
            fd_check(&series, protocol, seed);
        }
    }

    #[test]
    fn prefix_loss_adds_to_target_loss() {
        let series = random_series(2, 15, 5);
        let p = model(2, 4, 1);
        let plain = forecast_loss(&series, &p, &ForecastProtocol::default(), None).unwrap();
        let with = forecast_loss(
            &series,
            &p,
            &ForecastProtocol {
                prefix_loss: true,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert!(with.loss > plain.loss);
        assert!(with.targets > plain.targets);
    }

    #[test]
    fn fully_observed_window_is_skipped() {
        let series = random_series(2, 6, 3);
        let p = model(2, 3, 2);
        let protocol = ForecastProtocol {
            observe_fraction: 1.0,
            prefix_loss: false,
        };
        let mut g = Grads::zeros_like(&p);
        let r = forecast_loss(&series, &p, &protocol, Some(&mut g)).unwrap();
        assert!(r.skipped);
        assert!(g.is_zero());
    }

    #[test]
    fn loss_matches_manual_decode() {
        use crate::heads::predict_at;
        let series = random_series(2, 9, 8);
        let p = model(2, 3, 4);
        let k = series.prefix_len(0.5);
        let (states, _) = resume_sequence(
            &MarkovState::initial(3, series.times()[0]),
            &series,
            0..k,
            &p,
        )
        .unwrap();
        let end = states.last().unwrap();
        let mut sum = 0.0;
        let mut n = 0.0;
        for i in k..series.len() {
            let y = predict_at(end, series.times()[i] - end.last_time, p.decay(), p.forecast_head().unwrap()).unwrap();
            for c in 0..2 {
                if series.mask().get(i, c) == 1.0 {
                    sum += (y[c] - series.values().get(i, c)).powi(2);
                    n += 1.0;
                }
            }
        }
        let r = forecast_loss(&series, &p, &ForecastProtocol::default(), None).unwrap();
        assert!((r.loss - sum / n).abs() < 1e-12);
        assert_eq!(r.targets, n);
    }

    #[test]
    fn wrong_task_rejected() {
        let dims = ModelDims {
            input_dim: 2,
            hidden_dim: 3,
            output_dim: 2,
        };
        let p = GruweParams::zeros(Task::Tpp, dims).unwrap();
        let series = random_series(2, 5, 1);
        assert!(forecast_loss(&series, &p, &ForecastProtocol::default(), None).is_err());
    }
}
