use rand::Rng;

use crate::autograd::{Tape, Tensor, Var};
use crate::error::{arg_err, Result};

/// One stage of a network.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `A x + B` with `A` of shape `(out, in)`.
    Dense { weight: Tensor, bias: Tensor },
    /// Valid cross-correlation with `(out_ch, in_ch, kh, kw)` filters.
    Conv { filters: Tensor, bias: Tensor, stride: usize },
    MaxPool { window: usize, stride: usize },
    Relu,
    /// Collapses everything after the batch axis.
    Flatten,
    Sigmoid,
}

/// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
fn glorot(shape: Vec<usize>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-bound..bound)).collect()).expect("sized by shape")
}

impl Layer {
    pub fn dense(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Layer {
        Layer::Dense {
            weight: glorot(vec![outputs, inputs], inputs, outputs, rng),
            bias: Tensor::zeros(vec![outputs]),
        }
    }

    pub fn conv(out_ch: usize, in_ch: usize, kernel: usize, stride: usize, rng: &mut impl Rng) -> Result<Layer> {
        if stride == 0 || kernel == 0 {
            return Err(arg_err("conv kernel and stride must be positive"));
        }
        let area = kernel * kernel;
        Ok(Layer::Conv {
            filters: glorot(vec![out_ch, in_ch, kernel, kernel], in_ch * area, out_ch * area, rng),
            bias: Tensor::zeros(vec![out_ch]),
            stride,
        })
    }

    pub fn max_pool(window: usize, stride: usize) -> Result<Layer> {
        if window < 2 || stride == 0 {
            return Err(arg_err(format!("pool window must be at least 2 and stride positive, got {window}/{stride}")));
        }
        Ok(Layer::MaxPool { window, stride })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv { .. } => "conv",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Relu => "relu",
            Layer::Flatten => "flatten",
            Layer::Sigmoid => "sigmoid",
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense { weight, bias } => vec![weight, bias],
            Layer::Conv { filters, bias, .. } => vec![filters, bias],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense { weight, bias } => vec![weight, bias],
            Layer::Conv { filters, bias, .. } => vec![filters, bias],
            _ => vec![],
        }
    }

    /// Records this layer on `tape`; parameter leaves are appended to `bound`.
    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>, bound: &mut Vec<Var<'t>>) -> Result<Var<'t>> {
        match self {
            Layer::Dense { weight, bias } => {
                let (w, b) = (tape.param(weight), tape.param(bias));
                bound.extend([w, b]);
                x.linear(w, b)
            }
            Layer::Conv { filters, bias, stride } => {
                let (w, b) = (tape.param(filters), tape.param(bias));
                bound.extend([w, b]);
                x.conv2d(w, b, *stride)
            }
            Layer::MaxPool { window, stride } => x.maxpool2d(*window, *stride),
            Layer::Relu => Ok(x.relu()),
            Layer::Flatten => x.flatten(),
            Layer::Sigmoid => Ok(x.sigmoid()),
        }
    }
}
