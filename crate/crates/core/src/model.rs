//! Parameter container for a full model: decay, GRU gates and one linear
//! output head.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decay::DecayParams;
use crate::error::{GruweError, Result};
use crate::numerics::{uniform_init, DenseMatrix, Parameter, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Next-observation regression with a linear head.
    Forecast,
    /// Marked temporal point process with a softplus intensity head.
    Tpp,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Forecast => "forecast",
            Task::Tpp => "tpp",
        })
    }
}

impl FromStr for Task {
    type Err = GruweError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forecast" => Ok(Task::Forecast),
            "tpp" => Ok(Task::Tpp),
            other => Err(GruweError::Config(format!(
                "unknown task {other:?} (expected \"forecast\" or \"tpp\")"
            ))),
        }
    }
}

/// `input_dim` is D for forecasting and K (one-hot marks) for point
/// processes; `output_dim` is P or K respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl ModelDims {
    pub fn validate(&self, task: Task) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(GruweError::Config(format!(
                "all model dimensions must be positive, got {self:?}"
            )));
        }
        if task == Task::Tpp && self.input_dim != self.output_dim {
            return Err(GruweError::Config(format!(
                "point-process models need input_dim == output_dim == K, got {} and {}",
                self.input_dim, self.output_dim
            )));
        }
        Ok(())
    }
}

/// Fixed parameter slots. The order is the serialization and optimizer order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    WGamma,
    BGamma,
    Wz,
    Wr,
    Wh,
    Uz,
    Ur,
    Uh,
    Vz,
    Vr,
    Vh,
    Bz,
    Br,
    Bh,
    HeadW,
    HeadB,
}

impl Slot {
    pub const ALL: [Slot; 16] = [
        Slot::WGamma,
        Slot::BGamma,
        Slot::Wz,
        Slot::Wr,
        Slot::Wh,
        Slot::Uz,
        Slot::Ur,
        Slot::Uh,
        Slot::Vz,
        Slot::Vr,
        Slot::Vh,
        Slot::Bz,
        Slot::Br,
        Slot::Bh,
        Slot::HeadW,
        Slot::HeadB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self, task: Task) -> &'static str {
        match (self, task) {
            (Slot::WGamma, _) => "w_gamma",
            (Slot::BGamma, _) => "b_gamma",
            (Slot::Wz, _) => "w_z",
            (Slot::Wr, _) => "w_r",
            (Slot::Wh, _) => "w_h",
            (Slot::Uz, _) => "u_z",
            (Slot::Ur, _) => "u_r",
            (Slot::Uh, _) => "u_h",
            (Slot::Vz, _) => "v_z",
            (Slot::Vr, _) => "v_r",
            (Slot::Vh, _) => "v_h",
            (Slot::Bz, _) => "b_z",
            (Slot::Br, _) => "b_r",
            (Slot::Bh, _) => "b_h",
            (Slot::HeadW, Task::Forecast) => "w_out",
            (Slot::HeadB, Task::Forecast) => "b_out",
            (Slot::HeadW, Task::Tpp) => "w_lambda",
            (Slot::HeadB, Task::Tpp) => "b_lambda",
        }
    }

    pub fn shape(self, dims: &ModelDims) -> (usize, usize) {
        let (d, h, o) = (dims.input_dim, dims.hidden_dim, dims.output_dim);
        match self {
            Slot::WGamma | Slot::BGamma | Slot::Bz | Slot::Br | Slot::Bh => (h, 1),
            Slot::Wz | Slot::Wr | Slot::Wh | Slot::Vz | Slot::Vr | Slot::Vh => (h, d),
            Slot::Uz | Slot::Ur | Slot::Uh => (h, h),
            Slot::HeadW => (o, h),
            Slot::HeadB => (o, 1),
        }
    }
}

/// All learnable parameters of one model, each paired with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GruweParams {
    task: Task,
    dims: ModelDims,
    slots: Vec<Parameter>,
}

impl GruweParams {
    pub fn zeros(task: Task, dims: ModelDims) -> Result<Self> {
        dims.validate(task)?;
        let slots = Slot::ALL
            .iter()
            .map(|&s| {
                let (r, c) = s.shape(&dims);
                Parameter::new(s.name(task), DenseMatrix::zeros(r, c))
            })
            .collect();
        Ok(GruweParams { task, dims, slots })
    }

    /// Random initialization: gate and head matrices uniform on
    /// `±1/sqrt(fan_in)`, biases zero, decay weights uniform on `[0, 0.1]`
    /// and decay biases zero so every unit starts in the state-reset regime.
    pub fn init(task: Task, dims: ModelDims, rng: &mut RngState) -> Result<Self> {
        let mut p = Self::zeros(task, dims)?;
        for s in Slot::ALL {
            let (r, c) = s.shape(&dims);
            let name = s.name(task);
            let param = match s {
                Slot::WGamma => {
                    let data = (0..r).map(|_| rng.uniform_range(0.0, 0.1)).collect();
                    Parameter::new(name, DenseMatrix::column(data)?)
                }
                Slot::BGamma | Slot::Bz | Slot::Br | Slot::Bh | Slot::HeadB => continue,
                _ => uniform_init(rng, name, r, c, 1.0 / (c as f64).sqrt())?,
            };
            p.slots[s.index()] = param;
        }
        Ok(p)
    }

    /// Rebuilds from named parameters in slot order (checkpoint loading).
    pub fn from_parts(task: Task, dims: ModelDims, values: Vec<(String, DenseMatrix)>) -> Result<Self> {
        dims.validate(task)?;
        if values.len() != Slot::ALL.len() {
            return Err(GruweError::Load(format!(
                "expected {} parameters, found {}",
                Slot::ALL.len(),
                values.len()
            )));
        }
        let mut slots = Vec::with_capacity(values.len());
        for (s, (name, value)) in Slot::ALL.iter().zip(values) {
            if name != s.name(task) {
                return Err(GruweError::Load(format!(
                    "parameter {name:?} found where {:?} was expected",
                    s.name(task)
                )));
            }
            if value.shape() != s.shape(&dims) {
                return Err(GruweError::Load(format!(
                    "parameter {name} has shape {:?}, model dims require {:?}",
                    value.shape(),
                    s.shape(&dims)
                )));
            }
            slots.push(Parameter::new(name, value));
        }
        Ok(GruweParams { task, dims, slots })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn param(&self, s: Slot) -> &Parameter {
        &self.slots[s.index()]
    }

    pub fn param_mut(&mut self, s: Slot) -> &mut Parameter {
        &mut self.slots[s.index()]
    }

    pub fn value(&self, s: Slot) -> &DenseMatrix {
        &self.slots[s.index()].value
    }

    pub fn value_mut(&mut self, s: Slot) -> &mut DenseMatrix {
        &mut self.slots[s.index()].value
    }

    pub fn params(&self) -> &[Parameter] {
        &self.slots
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.slots
    }

    pub fn decay(&self) -> DecayParams<'_> {
        DecayParams::new(
            self.value(Slot::WGamma).as_slice(),
            self.value(Slot::BGamma).as_slice(),
        )
        .expect("decay slots share the hidden dimension")
    }

    pub fn zero_grads(&mut self) {
        self.slots.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(Parameter::len).sum()
    }

    /// Adds a worker-local gradient buffer into the paired accumulators.
    pub fn accumulate_grads(&mut self, grads: &Grads) {
        for (p, g) in self.slots.iter_mut().zip(&grads.slots) {
            p.grad.add_assign(g);
        }
    }

    /// Order-sensitive hash of all parameter bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xCBF2_9CE4_8422_2325;
        for p in &self.slots {
            for v in p.value.as_slice() {
                for byte in v.to_bits().to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01B3);
                }
            }
        }
        h
    }
}

/// Gradient buffer shaped like a [`GruweParams`], owned by one worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    slots: Vec<DenseMatrix>,
}

impl Grads {
    pub fn zeros_like(params: &GruweParams) -> Self {
        Grads {
            slots: params
                .slots
                .iter()
                .map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols()))
                .collect(),
        }
    }

    pub fn get(&self, s: Slot) -> &DenseMatrix {
        &self.slots[s.index()]
    }

    pub fn get_mut(&mut self, s: Slot) -> &mut DenseMatrix {
        &mut self.slots[s.index()]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.slots.iter_mut().for_each(|m| m.scale(factor));
    }

    pub fn global_norm(&self) -> f64 {
        self.slots.iter().map(DenseMatrix::sum_squares).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.slots
            .iter()
            .all(|m| m.as_slice().iter().all(|&v| v == 0.0))
    }

    /// Two mutable slots at once (e.g. decay weight and bias).
    pub(crate) fn pair_mut(&mut self, a: Slot, b: Slot) -> (&mut DenseMatrix, &mut DenseMatrix) {
        let (i, j) = (a.index(), b.index());
        assert!(i < j);
        let (lo, hi) = self.slots.split_at_mut(j);
        (&mut lo[i], &mut hi[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> ModelDims {
        ModelDims {
            input_dim: 3,
            hidden_dim: 4,
            output_dim: 2,
        }
    }

    #[test]
    fn shapes_follow_dims() {
        let p = GruweParams::zeros(Task::Forecast, dims()).unwrap();
        assert_eq!(p.value(Slot::Wz).shape(), (4, 3));
        assert_eq!(p.value(Slot::Uh).shape(), (4, 4));
        assert_eq!(p.value(Slot::HeadW).shape(), (2, 4));
        assert_eq!(p.value(Slot::HeadB).shape(), (2, 1));
        assert_eq!(p.param(Slot::HeadW).name, "w_out");
        for param in p.params() {
            assert_eq!(param.value.shape(), param.grad.shape());
        }
    }

    #[test]
    fn init_contract() {
        let p = GruweParams::init(Task::Forecast, dims(), &mut RngState::new(1)).unwrap();
        assert!(p.value(Slot::WGamma).as_slice().iter().all(|&w| (0.0..=0.1).contains(&w)));
        assert!(p.value(Slot::BGamma).as_slice().iter().all(|&b| b == 0.0));
        let bound = 1.0 / 3f64.sqrt();
        assert!(p.value(Slot::Wz).as_slice().iter().all(|w| w.abs() <= bound));
        let q = GruweParams::init(Task::Forecast, dims(), &mut RngState::new(1)).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.checksum(), q.checksum());
    }

    #[test]
    fn tpp_requires_square_marks() {
        assert!(GruweParams::zeros(Task::Tpp, dims()).is_err());
        assert!(GruweParams::zeros(
            Task::Forecast,
            ModelDims {
                input_dim: 0,
                hidden_dim: 1,
                output_dim: 1
            }
        )
        .is_err());
    }

    #[test]
    fn grads_accumulate_into_params() {
        let mut p = GruweParams::zeros(Task::Forecast, dims()).unwrap();
        let mut g = Grads::zeros_like(&p);
        g.get_mut(Slot::Bz).fill(2.0);
        p.accumulate_grads(&g);
        p.accumulate_grads(&g);
        assert!(p.param(Slot::Bz).grad.as_slice().iter().all(|&v| v == 4.0));
        p.zero_grads();
        assert!(p.params().iter().all(|q| q.grad.as_slice().iter().all(|&v| v == 0.0)));
    }
}
