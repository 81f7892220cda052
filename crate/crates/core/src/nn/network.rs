use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Layer;
use crate::autograd::{Tape, Tensor, Var};
use crate::error::{arg_err, shape_err, Result};
use crate::image::Image;

/// An ordered stack of layers. Inputs always carry a leading batch axis.
///
/// A network whose last layer is [`Layer::Sigmoid`] is a binary classifier
/// producing one probability per sample and trained with binary
/// cross-entropy; otherwise the final layer emits class scores trained with
/// softmax cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Everything recorded by one forward pass.
#[derive(Debug)]
pub struct Forward<'t> {
    /// Output of each executed layer, in order.
    pub activations: Vec<Var<'t>>,
    /// Parameter leaves in [`Network::params`] order.
    pub params: Vec<Var<'t>>,
}

impl<'t> Forward<'t> {
    pub fn output(&self) -> Var<'t> {
        *self.activations.last().expect("at least one layer ran")
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(arg_err("network needs at least one layer"));
        }
        Ok(Network { layers })
    }

    /// `Conv 8x3x3 -> ReLU -> MaxPool 2 -> Flatten -> Dense(classes)` for
    /// `(channels, height, width)` inputs.
    pub fn small_cnn(channels: usize, height: usize, width: usize, classes: usize, seed: u64) -> Result<Self> {
        if height < 4 || width < 4 {
            return Err(arg_err(format!("small_cnn needs inputs of at least 4x4, got {height}x{width}")));
        }
        if classes < 2 {
            return Err(arg_err("need at least two classes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let filters = 8;
        let (ph, pw) = ((height - 2) / 2, (width - 2) / 2);
        Network::new(vec![
            Layer::conv(filters, channels, 3, 1, &mut rng)?,
            Layer::Relu,
            Layer::max_pool(2, 2)?,
            Layer::Flatten,
            Layer::dense(filters * ph * pw, classes, &mut rng),
        ])
    }

    pub fn is_binary(&self) -> bool {
        matches!(self.layers.last(), Some(Layer::Sigmoid))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.params_mut().into_iter().for_each(|p| p.set_frozen(frozen));
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Tensor::zero_grad);
    }

    /// Runs layers `0..=last`.
    pub fn forward_until<'t>(&self, tape: &'t Tape, x: Var<'t>, last: usize) -> Result<Forward<'t>> {
        if last >= self.layers.len() {
            return Err(arg_err(format!("layer index {last} out of range for {} layers", self.layers.len())));
        }
        let mut params = Vec::new();
        let mut activations = Vec::with_capacity(last + 1);
        let mut h = x;
        for (i, layer) in self.layers[..=last].iter().enumerate() {
            h = layer
                .forward(tape, h, &mut params)
                .map_err(|e| shape_err(format!("layer {i} ({}): {e}", layer.name())))?;
            activations.push(h);
        }
        Ok(Forward { activations, params })
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>) -> Result<Forward<'t>> {
        self.forward_until(tape, x, self.layers.len() - 1)
    }

    /// Mean classification loss of a batch. Returns the loss and the forward
    /// record (whose output is the logits).
    pub fn loss<'t>(&self, tape: &'t Tape, x: Var<'t>, labels: &[usize]) -> Result<(Var<'t>, Forward<'t>)> {
        if self.is_binary() {
            if self.layers.len() < 2 {
                return Err(arg_err("binary network needs a layer before the sigmoid"));
            }
            let fwd = self.forward_until(tape, x, self.layers.len() - 2)?;
            if let Some(&l) = labels.iter().find(|&&l| l > 1) {
                return Err(arg_err(format!("label {l} out of range for a binary network")));
            }
            let targets: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
            let loss = fwd.output().bce_with_logits(&targets)?;
            Ok((loss, fwd))
        } else {
            let fwd = self.forward(tape, x)?;
            let loss = fwd.output().softmax_cross_entropy(labels)?;
            Ok((loss, fwd))
        }
    }

    /// Class probabilities for each sample of a batched forward output.
    /// Binary networks report `[1 - p, p]`.
    pub fn probabilities(&self, output: &[f64], batch: usize) -> Vec<Vec<f64>> {
        let width = output.len() / batch.max(1);
        output
            .chunks_exact(width.max(1))
            .map(|row| {
                if self.is_binary() {
                    vec![1.0 - row[0], row[0]]
                } else {
                    crate::autograd::softmax_row(row)
                }
            })
            .collect()
    }

    /// Probabilities for a single input tensor (no batch axis).
    pub fn predict_tensor(&self, input: &Tensor) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let mut shape = vec![1];
        shape.extend_from_slice(input.shape());
        let x = tape.constant(shape, input.data().to_vec())?;
        let out = self.forward(&tape, x)?.output().value();
        Ok(self.probabilities(&out, 1).remove(0))
    }

    /// Class probabilities for one image.
    pub fn predict(&self, img: &Image) -> Result<Vec<f64>> {
        self.predict_tensor(&Tensor::from_image(img))
    }

    /// Copies gradients from a backward pass into the parameter tensors.
    pub fn absorb_grads(&mut self, bound: &[Var<'_>]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != bound.len() {
            return Err(shape_err(format!("{} gradients for {} parameters", bound.len(), params.len())));
        }
        for (p, v) in params.iter_mut().zip(bound) {
            p.accumulate_grad(&v.grad())?;
        }
        Ok(())
    }
}

/// Index of the largest probability; the first on ties.
pub fn argmax(probs: &[f64]) -> usize {
    probs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
        .0
}
