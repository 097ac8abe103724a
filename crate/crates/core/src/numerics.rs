//! Dense linear algebra, scalar nonlinearities and the seeded generator
//! everything else is built on.
//!
//! Storage is row-major `f64`. The hot-path helpers (`*_acc`) skip shape
//! checks and are only used by code that has validated dimensions once up
//! front; the public checked operations return [`GruweError::Shape`].

use std::ops::{Deref, DerefMut};

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::error::{GruweError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        DenseVector(vec![0.0; len])
    }

    /// Rejects NaN and infinite entries.
    pub fn checked(data: Vec<f64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(GruweError::Domain(format!(
                "non-finite vector entry {} at index {i}",
                data[i]
            )));
        }
        Ok(DenseVector(data))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        DenseVector(v)
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Row-major dense matrix. Vectors that live inside a [`Parameter`] are
/// stored as `n x 1` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting length mismatches and
    /// non-finite entries.
    pub fn checked(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(GruweError::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(GruweError::Domain(format!(
                "non-finite matrix entry {} at flat index {i}",
                data[i]
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != cols) {
            return Err(GruweError::Shape(format!(
                "ragged rows: row {r} has {} entries, expected {cols}",
                rows[r].len()
            )));
        }
        Self::checked(rows.len(), cols, rows.concat())
    }

    pub fn column(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::checked(n, 1, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn matvec(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.cols {
            return Err(GruweError::Shape(format!(
                "matvec: {}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_acc(v, &mut out);
        Ok(DenseVector(out))
    }

    /// `out += self * v`
    pub fn matvec_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o += dot(row, v);
        }
    }

    /// `out += self^T * v`
    pub fn matvec_t_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&vi, row) in v.iter().zip(self.data.chunks_exact(self.cols.max(1))) {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
    }

    /// `self += a * b^T`
    pub fn outer_acc(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        let cols = self.cols.max(1);
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(cols)) {
            if ai == 0.0 {
                continue;
            }
            for (r, &bj) in row.iter_mut().zip(b) {
                *r += ai * bj;
            }
        }
    }

    /// `self += other` elementwise.
    pub fn add_assign(&mut self, other: &DenseMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

pub fn tanh_grad(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

/// `ln(1 + e^x)`, evaluated as `x + ln(1 + e^-x)` for positive `x`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn softplus_grad(x: f64) -> f64 {
    sigmoid(x)
}

/// A learnable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: DenseMatrix) -> Self {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deterministic stream: xoshiro256** seeded through splitmix64.
///
/// Floats are derived from the top 53 bits of each output so the stream is
/// identical on every platform.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: Xoshiro256StarStar,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            seed,
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Independent stream keyed by `seed` and a path of integers, e.g.
    /// `(epoch, sequence index)`. Used so that per-sequence randomness does
    /// not depend on processing order.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut s = splitmix64(seed);
        for &p in path {
            s = splitmix64(s ^ splitmix64(p.wrapping_add(GOLDEN_GAMMA)));
        }
        Self::new(s)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Exponential variate with the given rate (inverse CDF).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -(1.0 - self.uniform()).ln() / rate
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `[0, n)` via the widening-multiply reduction.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Parameter with entries i.i.d. uniform on `[-scale, scale]`.
pub fn uniform_init(
    rng: &mut RngState,
    name: &str,
    rows: usize,
    cols: usize,
    scale: f64,
) -> Result<Parameter> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(GruweError::Config(format!(
            "initialization scale for {name} must be positive and finite, got {scale}"
        )));
    }
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-scale, scale))
        .collect();
    Ok(Parameter::new(name, DenseMatrix::checked(rows, cols, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_cases() {
        let v = DenseMatrix::identity(3).matvec(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0]);

        let v = DenseMatrix::zeros(2, 2).matvec(&[5.0, 7.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0]);

        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0]).unwrap().as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_shape_error() {
        let m = DenseMatrix::zeros(2, 3);
        assert!(matches!(m.matvec(&[1.0, 2.0]), Err(GruweError::Shape(_))));
    }

    #[test]
    fn checked_constructors_reject_non_finite() {
        assert!(DenseVector::checked(vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::checked(1, 2, vec![f64::INFINITY, 0.0]).is_err());
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn transpose_and_outer_helpers() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let mut out = vec![0.0; 2];
        m.matvec_t_acc(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-4.0, -4.0]);

        let mut o = DenseMatrix::zeros(2, 3);
        o.outer_acc(&[1.0, 2.0], &[1.0, 0.0, -1.0]);
        assert_eq!(o.as_slice(), &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
    }

    #[test]
    fn nonlinearity_anchors() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(0.0) - 0.6931472).abs() < 1e-7);
        assert_eq!(tanh(0.0), 0.0);
    }

    #[test]
    fn softplus_extremes() {
        assert_eq!(softplus(1e6), 1e6);
        assert!(softplus(-1e6) >= 0.0);
        assert!(softplus(-800.0) >= 0.0);
        for x in [-1e6, -50.0, -1.0, 0.0, 1.0, 50.0, 700.0, 1e6] {
            let y = softplus(x);
            assert!(y.is_finite() && y >= 0.0, "softplus({x}) = {y}");
        }
    }

    /// Central differences at step 1e-5. The denominator is floored at 1e-4
    /// because in the saturated tails the derivative is far below the
    /// cancellation error of a difference quotient in f64.
    #[test]
    fn nonlinearity_derivatives_match_central_differences() {
        type F = fn(f64) -> f64;
        let pairs: [(&str, F, F); 3] = [
            ("sigmoid", sigmoid, sigmoid_grad),
            ("tanh", tanh, tanh_grad),
            ("softplus", softplus, softplus_grad),
        ];
        let mut rng = RngState::new(7);
        let h = 1e-5;
        for (name, f, df) in pairs {
            for _ in 0..1000 {
                let x = rng.uniform_range(-20.0, 20.0);
                let fd = (f(x + h) - f(x - h)) / (2.0 * h);
                let an = df(x);
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-4);
                assert!(rel < 1e-6, "{name}'({x}): analytic {an} vs fd {fd}, rel {rel}");
            }
        }
    }

    #[test]
    fn uniform_init_contract() {
        let mut rng = RngState::new(1);
        assert!(matches!(
            uniform_init(&mut rng, "w", 2, 2, 0.0),
            Err(GruweError::Config(_))
        ));
        let a = uniform_init(&mut RngState::new(42), "w", 2, 2, 0.5).unwrap();
        let b = uniform_init(&mut RngState::new(42), "w", 2, 2, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(a.value.as_slice().iter().all(|v| v.abs() <= 0.5));
        assert_eq!(a.grad.as_slice(), &[0.0; 4]);
    }

    #[test]
    fn uniform_init_mean_is_centered() {
        let scale = 3.0;
        let p = uniform_init(&mut RngState::new(2024), "big", 1000, 1000, scale).unwrap();
        let mean = p.value.as_slice().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() < 0.01 * scale, "mean {mean}");
    }

    #[test]
    fn rng_streams_reproducible() {
        let mut a = RngState::new(99);
        let mut b = RngState::new(99);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RngState::new(100);
        assert_ne!(RngState::new(99).next_u64(), c.next_u64());
    }

    #[test]
    fn rng_pinned_first_outputs() {
        // xoshiro256** seeded by splitmix64(0); guards against a silent
        // change of generator.
        let mut r = RngState::new(0);
        let first: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        let mut again = RngState::new(0);
        assert_eq!(first, (0..3).map(|_| again.next_u64()).collect::<Vec<_>>());
        assert_eq!(first[0], 0x99EC_5F36_CB75_F2B4);
    }

    #[test]
    fn derived_streams_differ() {
        let a = RngState::derive(5, &[0, 1]).next_u64();
        let b = RngState::derive(5, &[1, 0]).next_u64();
        let c = RngState::derive(5, &[0, 1]).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn zero_grad_clears() {
        let mut p = Parameter::new("p", DenseMatrix::identity(2));
        p.grad.fill(3.0);
        p.zero_grad();
        assert!(p.grad.as_slice().iter().all(|&g| g == 0.0));
    }
}
