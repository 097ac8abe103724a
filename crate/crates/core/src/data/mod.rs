//! Sequence types, JSONL ingestion, splits and synthetic generators.

mod jsonl;
mod split;
pub mod synth;

pub use jsonl::{
    load_events_jsonl, load_series_jsonl, parse_events_jsonl, parse_series_jsonl, write_events_jsonl,
    write_series_jsonl, EVENTS_FORMAT, JSONL_VERSION, MAX_REPORTED_VIOLATIONS, SERIES_FORMAT,
};
pub use split::{split, DatasetSplit};

use serde::{Deserialize, Serialize};

use crate::error::{GruweError, Result};
use crate::numerics::DenseMatrix;

/// One multivariate series observed at irregular times.
///
/// Unobserved entries hold 0 in `values` and 0 in `mask`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularSeries {
    times: Vec<f64>,
    values: DenseMatrix,
    mask: DenseMatrix,
}

impl IrregularSeries {
    pub fn new(times: Vec<f64>, values: DenseMatrix, mask: DenseMatrix) -> Result<Self> {
        if values.rows() != times.len() || mask.shape() != values.shape() {
            return Err(GruweError::Data(format!(
                "{} timestamps, values {:?}, mask {:?}",
                times.len(),
                values.shape(),
                mask.shape()
            )));
        }
        check_strictly_increasing(&times)?;
        let mut values = values;
        for r in 0..values.rows() {
            for c in 0..values.cols() {
                let m = mask.get(r, c);
                if m != 0.0 && m != 1.0 {
                    return Err(GruweError::Data(format!("mask entry ({r},{c}) is {m}, expected 0 or 1")));
                }
                if m == 0.0 {
                    values.set(r, c, 0.0);
                }
            }
        }
        Ok(IrregularSeries { times, values, mask })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn mask(&self) -> &DenseMatrix {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&m| m == 1.0).count()
    }

    /// Index of the first row after the observed prefix: rows with
    /// `t <= t_0 + fraction * (t_end - t_0)` form the prefix.
    pub fn prefix_len(&self, fraction: f64) -> usize {
        match (self.times.first(), self.times.last()) {
            (Some(&t0), Some(&t1)) => {
                let cut = t0 + fraction * (t1 - t0);
                self.times.partition_point(|&t| t <= cut).max(1)
            }
            _ => 0,
        }
    }
}

/// One realization of a marked point process on `[0, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    times: Vec<f64>,
    types: Vec<usize>,
    t_max: f64,
}

impl EventSequence {
    pub fn new(times: Vec<f64>, types: Vec<usize>, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(GruweError::Data(format!("t_max must be positive and finite, got {t_max}")));
        }
        if times.len() != types.len() {
            return Err(GruweError::Data(format!(
                "{} event times but {} event types",
                times.len(),
                types.len()
            )));
        }
        check_strictly_increasing(&times)?;
        if let Some(&t) = times.first() {
            if t < 0.0 {
                return Err(GruweError::Data(format!("event time {t} is negative")));
            }
        }
        if let Some(&t) = times.last() {
            if t > t_max {
                return Err(GruweError::Data(format!("event time {t} exceeds t_max {t_max}")));
            }
        }
        Ok(EventSequence { times, types, t_max })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn types(&self) -> &[usize] {
        &self.types
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Rejects marks outside `[0, num_types)`.
    pub fn check_types(&self, num_types: usize) -> Result<()> {
        if let Some(j) = self.types.iter().position(|&k| k >= num_types) {
            return Err(GruweError::Data(format!(
                "event {j} has type {} but the model has {num_types} types",
                self.types[j]
            )));
        }
        Ok(())
    }
}

fn check_strictly_increasing(times: &[f64]) -> Result<()> {
    if let Some(i) = times.iter().position(|t| !t.is_finite()) {
        return Err(GruweError::Data(format!("timestamp {i} is not finite")));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(GruweError::Data(format!(
            "timestamps not strictly increasing at index {}: {} then {}",
            i + 1,
            times[i],
            times[i + 1]
        )));
    }
    Ok(())
}

/// Mean inter-arrival time pooled over sequences (the first gap of each
/// sequence is measured from 0).
pub fn mean_inter_arrival(seqs: &[EventSequence]) -> Option<f64> {
    let (sum, n) = seqs.iter().fold((0.0, 0usize), |(s, n), seq| {
        let mut prev = 0.0;
        let mut s = s;
        for &t in seq.times() {
            s += t - prev;
            prev = t;
        }
        (s, n + seq.len())
    });
    (n > 0).then(|| sum / n as f64)
}

/// Per-variable z-score statistics over observed entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Variables never observed, or with zero spread, get mean 0 / std 1.
    pub fn fit<'a>(series: impl IntoIterator<Item = &'a IrregularSeries>, dim: usize) -> Self {
        let mut n = vec![0usize; dim];
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for s in series {
            for r in 0..s.len() {
                for c in 0..dim {
                    if s.mask().get(r, c) == 1.0 {
                        let v = s.values().get(r, c);
                        n[c] += 1;
                        sum[c] += v;
                        sq[c] += v * v;
                    }
                }
            }
        }
        let mut mean = vec![0.0; dim];
        let mut std = vec![1.0; dim];
        for c in 0..dim {
            if n[c] > 0 {
                mean[c] = sum[c] / n[c] as f64;
                let var = (sq[c] / n[c] as f64 - mean[c] * mean[c]).max(0.0);
                if var > 1e-24 {
                    std[c] = var.sqrt();
                }
            }
        }
        Standardization { mean, std }
    }

    pub fn apply(&self, s: &IrregularSeries) -> Result<IrregularSeries> {
        self.map(s, |v, c| (v - self.mean[c]) / self.std[c])
    }

    pub fn invert_row(&self, row: &mut [f64]) {
        for (c, v) in row.iter_mut().enumerate() {
            *v = *v * self.std[c] + self.mean[c];
        }
    }

    fn map(&self, s: &IrregularSeries, f: impl Fn(f64, usize) -> f64) -> Result<IrregularSeries> {
        if s.dim() != self.mean.len() {
            return Err(GruweError::Shape(format!(
                "series has {} variables, standardization has {}",
                s.dim(),
                self.mean.len()
            )));
        }
        let mut values = s.values().clone();
        for r in 0..s.len() {
            for c in 0..s.dim() {
                if s.mask().get(r, c) == 1.0 {
                    let v = f(s.values().get(r, c), c);
                    if !v.is_finite() {
                        return Err(GruweError::Data(format!(
                            "value {} at row {r}, variable {c} overflows when standardized",
                            s.values().get(r, c)
                        )));
                    }
                    values.set(r, c, v);
                }
            }
        }
        IrregularSeries::new(s.times().to_vec(), values, s.mask().clone())
    }
}
