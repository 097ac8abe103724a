use serde::{Deserialize, Serialize};

use crate::error::{GruweError, Result};
use crate::numerics::RngState;

/// Disjoint train/validation/test index lists over a collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn select<'a, T>(indices: &[usize], items: &'a [T]) -> Vec<&'a T> {
        indices.iter().map(|&i| &items[i]).collect()
    }
}

/// Shuffled partition of `0..n`. Ratios are normalized; the validation and
/// test sizes are rounded down and the remainder goes to train.
pub fn split(n: usize, ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(GruweError::Config(format!("split ratios must be finite and non-negative, got {ratios:?}")));
    }
    let total: f64 = ratios.iter().sum();
    if !(total > 0.0) {
        return Err(GruweError::Config("split ratios sum to zero".into()));
    }
    let n_val = ((n as f64) * ratios[1] / total).floor() as usize;
    let n_test = ((n as f64) * ratios[2] / total).floor() as usize;
    let n_train = n - n_val - n_test;
    let mut idx: Vec<usize> = (0..n).collect();
    RngState::derive(seed, &[0x5911]).shuffle(&mut idx);
    let mut train = idx[..n_train].to_vec();
    let mut validation = idx[n_train..n_train + n_val].to_vec();
    let mut test = idx[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed,
    })
}
