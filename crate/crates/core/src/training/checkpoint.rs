//! Versioned JSON checkpoints. Every real number is stored as the 16-digit
//! hex of its IEEE-754 bits so a save/load cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Standardization;
use crate::error::{GruweError, Result};
use crate::model::{GruweParams, ModelDims, Task};
use crate::numerics::DenseMatrix;

pub const CHECKPOINT_FORMAT: &str = "gruwe-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub task: Task,
    pub dims: ModelDims,
    pub seed: u64,
    pub standardization: Option<Standardization>,
    /// Training-set mean inter-arrival time (tpp), used to size the
    /// next-event quadrature window.
    pub mean_inter_arrival: Option<f64>,
    pub selected_epoch: Option<usize>,
}

impl CheckpointMeta {
    pub fn new(task: Task, dims: ModelDims, seed: u64) -> Self {
        CheckpointMeta {
            task,
            dims,
            seed,
            standardization: None,
            mean_inter_arrival: None,
            selected_epoch: None,
        }
    }

    /// Errors unless the stored dimensions equal `expected`.
    pub fn check_dims(&self, expected: &ModelDims) -> Result<()> {
        if &self.dims != expected {
            return Err(GruweError::Load(format!(
                "checkpoint dims (D={}, H={}, P={}) do not match config (D={}, H={}, P={})",
                self.dims.input_dim,
                self.dims.hidden_dim,
                self.dims.output_dim,
                expected.input_dim,
                expected.hidden_dim,
                expected.output_dim
            )));
        }
        Ok(())
    }
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn unhex(s: &str) -> Result<f64> {
    if s.len() != 16 {
        return Err(GruweError::Load(format!("bad hex float {s:?}")));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| GruweError::Load(format!("bad hex float {s:?}")))
}

fn unhex_all(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| unhex(s)).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileStandardization {
    mean: Vec<String>,
    std: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMeta {
    task: Task,
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    seed: u64,
    standardization: Option<FileStandardization>,
    mean_inter_arrival: Option<String>,
    selected_epoch: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileParam {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCheckpoint {
    format: String,
    version: u32,
    meta: FileMeta,
    params: Vec<FileParam>,
}

pub fn checkpoint_to_string(params: &GruweParams, meta: &CheckpointMeta) -> Result<String> {
    if params.task() != meta.task || params.dims() != meta.dims {
        return Err(GruweError::Internal("checkpoint meta disagrees with parameters".into()));
    }
    let file = FileCheckpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        meta: FileMeta {
            task: meta.task,
            input_dim: meta.dims.input_dim,
            hidden_dim: meta.dims.hidden_dim,
            output_dim: meta.dims.output_dim,
            seed: meta.seed,
            standardization: meta.standardization.as_ref().map(|s| FileStandardization {
                mean: s.mean.iter().copied().map(hex).collect(),
                std: s.std.iter().copied().map(hex).collect(),
            }),
            mean_inter_arrival: meta.mean_inter_arrival.map(hex),
            selected_epoch: meta.selected_epoch,
        },
        params: params
            .params()
            .iter()
            .map(|p| FileParam {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                data: p.value.as_slice().iter().copied().map(hex).collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).map_err(|e| GruweError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn checkpoint_from_str(text: &str) -> Result<(GruweParams, CheckpointMeta)> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| GruweError::Load(format!("not a checkpoint: {e}")))?;
    let format = value.get("format").and_then(|v| v.as_str());
    if format != Some(CHECKPOINT_FORMAT) {
        return Err(GruweError::Load(format!("missing or wrong format tag {format:?}")));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| GruweError::Load("missing version".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(GruweError::UnsupportedVersion {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: CHECKPOINT_VERSION,
        });
    }
    let file: FileCheckpoint =
        serde_json::from_value(value).map_err(|e| GruweError::Load(format!("malformed checkpoint: {e}")))?;
    let m = file.meta;
    let dims = ModelDims {
        input_dim: m.input_dim,
        hidden_dim: m.hidden_dim,
        output_dim: m.output_dim,
    };
    dims.validate(m.task).map_err(|e| GruweError::Load(e.to_string()))?;
    let standardization = match m.standardization {
        Some(s) => {
            let st = Standardization {
                mean: unhex_all(&s.mean)?,
                std: unhex_all(&s.std)?,
            };
            if st.mean.len() != dims.input_dim || st.std.len() != dims.input_dim {
                return Err(GruweError::Load("standardization length differs from input_dim".into()));
            }
            Some(st)
        }
        None => None,
    };
    let mut parts = Vec::with_capacity(file.params.len());
    for p in file.params {
        let data = unhex_all(&p.data)?;
        let mat = DenseMatrix::checked(p.rows, p.cols, data).map_err(|e| GruweError::Load(format!("{}: {e}", p.name)))?;
        parts.push((p.name, mat));
    }
    let params = GruweParams::from_parts(m.task, dims, parts)?;
    let meta = CheckpointMeta {
        task: m.task,
        dims,
        seed: m.seed,
        standardization,
        mean_inter_arrival: m.mean_inter_arrival.as_deref().map(unhex).transpose()?,
        selected_epoch: m.selected_epoch,
    };
    Ok((params, meta))
}

pub fn save_checkpoint(path: &Path, params: &GruweParams, meta: &CheckpointMeta) -> Result<()> {
    let text = checkpoint_to_string(params, meta)?;
    std::fs::write(path, text).map_err(|e| GruweError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(GruweParams, CheckpointMeta)> {
    let text = std::fs::read_to_string(path).map_err(|e| GruweError::io(path, e))?;
    checkpoint_from_str(&text)
}
