//! Define-by-run reverse-mode differentiation over shaped `f64` arrays.
//!
//! Persistent state (network weights, images being optimized) lives in
//! [`Tensor`]s. Each forward pass records onto a fresh [`Tape`]: tensors enter
//! it through [`Tape::param`] or [`Tape::constant`] and come back as [`Var`]
//! handles, every operation on a `Var` appends a node, and
//! [`Var::backward`] walks the tape in reverse accumulating `d loss / d node`
//! into each node's gradient slot.
//!
//! Freezing only masks updates: a frozen tensor still receives gradients, it
//! is just skipped by [`sgd_step`].
//!
//! ```
//! use pixforge::autograd::{Tape, Tensor};
//!
//! let x = Tensor::new(vec![2], vec![3.0, 4.0]).unwrap();
//! let tape = Tape::new();
//! let xv = tape.param(&x);
//! let loss = xv.sqnorm();
//! assert_eq!(loss.item(), 25.0);
//! loss.backward().unwrap();
//! assert_eq!(xv.grad(), vec![6.0, 8.0]);
//! ```

mod ops;
mod tape;

pub use tape::{Tape, Var};

/// Numerically stable softmax of one row of scores.
pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    ops::softmax(row)
}

use crate::error::{shape_err, Result};
use crate::image::Image;

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// A shaped array with a gradient accumulator and a freeze flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Vec<f64>,
    frozen: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(shape_err(format!("shape {:?} holds {} values, got {}", shape, numel(&shape), data.len())));
        }
        let grad = vec![0.0; data.len()];
        Ok(Tensor { shape, data, grad, frozen: false })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = numel(&shape);
        Tensor { shape, data: vec![0.0; n], grad: vec![0.0; n], frozen: false }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![], data: vec![v], grad: vec![0.0], frozen: false }
    }

    /// `(channels, height, width)` tensor with intensities scaled to `[0, 1]`.
    pub fn from_image(img: &Image) -> Self {
        let (w, h, c) = (img.width(), img.height(), img.channels());
        let mut data = vec![0.0; w * h * c];
        for (i, &v) in img.data().iter().enumerate() {
            let (pix, ch) = (i / c, i % c);
            data[ch * w * h + pix] = v as f64 / 255.0;
        }
        Tensor::new(vec![c, h, w], data).expect("consistent by construction")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Adds `g` into the gradient accumulator.
    pub fn accumulate_grad(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.grad.len() {
            return Err(shape_err(format!("gradient of length {} for tensor of {}", g.len(), self.grad.len())));
        }
        self.grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    /// Same values under a new shape with equal element count.
    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        if numel(&shape) != self.data.len() {
            return Err(shape_err(format!("cannot view {:?} as {:?}", self.shape, shape)));
        }
        self.shape = shape;
        Ok(self)
    }
}

/// One gradient-descent update: every non-frozen tensor moves by `-lr * grad`.
pub fn sgd_step<'a>(params: impl IntoIterator<Item = &'a mut Tensor>, lr: f64) {
    for p in params {
        if p.frozen {
            continue;
        }
        for (v, g) in p.data.iter_mut().zip(&p.grad) {
            *v -= lr * g;
        }
    }
}
