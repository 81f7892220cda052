//! Pixel-space optimization against a fixed, trained network: the fast
//! gradient-sign attack, deep dream and Gram-matrix style transfer.
//!
//! Every procedure borrows the network immutably. The pixels are the only
//! thing that moves; the weights come out bit-identical by construction.
//! Images are handled as `(channels, height, width)` tensors in `[0, 1]`
//! (see [`Tensor::from_image`]) and quantized back to 8 bits at the end.

use crate::autograd::{Tape, Tensor, Var};
use crate::error::{arg_err, shape_err, Result};
use crate::geometry::{resize, InterpMode};
use crate::image::{quantize, Image, RealImage};
use crate::nn::{Layer, Network};

/// Indices of the layers whose activations an objective reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSelection(Vec<usize>);

impl LayerSelection {
    /// Sorted and deduplicated; must be nonempty and in range for `net`.
    pub fn new(net: &Network, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        match indices.last() {
            None => Err(arg_err("layer selection is empty")),
            Some(&i) if i >= net.layers.len() => {
                Err(arg_err(format!("layer {i} out of range for {} layers", net.layers.len())))
            }
            Some(_) => Ok(LayerSelection(indices)),
        }
    }

    /// Outputs of every ReLU that directly follows a convolution, falling
    /// back to the convolutions themselves, then to the first layer.
    pub fn default_for(net: &Network) -> Self {
        let layers = &net.layers;
        let mut picked: Vec<usize> = (1..layers.len())
            .filter(|&i| matches!(layers[i], Layer::Relu) && matches!(layers[i - 1], Layer::Conv { .. }))
            .collect();
        if picked.is_empty() {
            picked = (0..layers.len()).filter(|&i| matches!(layers[i], Layer::Conv { .. })).collect();
        }
        if picked.is_empty() {
            picked.push(0);
        }
        LayerSelection(picked)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Deepest selected layer.
    pub fn last(&self) -> usize {
        *self.0.last().expect("nonempty by construction")
    }
}

/// Inner products of the flattened feature maps of one activation.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    /// Row-major `n x n` entries.
    pub data: Vec<f64>,
}

impl GramMatrix {
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.n + k]
    }
}

/// `(maps, values per map)` of an activation: `(C, H, W)`, `(1, C, H, W)`,
/// `(1, n)` or `(n)`. Vector activations count each entry as its own map.
fn feature_layout(shape: &[usize]) -> Result<(usize, usize)> {
    match shape {
        [n] | [1, n] => Ok((*n, 1)),
        [c, h, w] | [1, c, h, w] => Ok((*c, h * w)),
        _ => Err(shape_err(format!("no feature-map layout for activation shape {shape:?}"))),
    }
}

/// Gram matrix on the tape, normalized by the total number of activation
/// values so layers of different size contribute on a comparable scale.
pub fn gram_var<'t>(acts: Var<'t>) -> Result<Var<'t>> {
    let (c, hw) = feature_layout(&acts.shape())?;
    let f = acts.reshape(vec![c, hw])?;
    Ok(f.matmul(f.transpose()?)?.scale(1.0 / (c * hw) as f64))
}

pub fn gram(acts: &Tensor) -> Result<GramMatrix> {
    let tape = Tape::new();
    let g = gram_var(tape.param(acts))?;
    let n = g.shape()[0];
    Ok(GramMatrix { n, data: g.value() })
}

/// Squared Euclidean distance between two activations of the same shape.
pub fn content_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!("activation shapes {:?} and {:?} differ", a.shape(), b.shape())));
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Quantizes a `(channels, height, width)` tensor in `[0, 1]` to an image.
pub fn tensor_to_image(t: &Tensor) -> Result<Image> {
    let [c, h, w] = t.shape()[..] else {
        return Err(shape_err(format!("expected (channels, height, width), got {:?}", t.shape())));
    };
    if c != 1 && c != 3 {
        return Err(shape_err(format!("images have 1 or 3 channels, got {c}")));
    }
    let mut data = vec![0u8; c * h * w];
    for (i, &v) in t.data().iter().enumerate() {
        let (ch, pix) = (i / (h * w), i % (h * w));
        data[pix * c + ch] = quantize(v.clamp(0.0, 1.0) * 255.0);
    }
    Image::new(w, h, c, data)
}

fn check_input(net: &Network, x: &Tensor) -> Result<()> {
    if x.shape().len() != 3 {
        return Err(shape_err(format!("expected a (channels, height, width) image tensor, got {:?}", x.shape())));
    }
    if let Some(Layer::Conv { filters, .. }) = net.layers.first() {
        if filters.shape()[1] != x.shape()[0] {
            return Err(shape_err(format!(
                "network takes {} channels, image has {}",
                filters.shape()[1],
                x.shape()[0]
            )));
        }
    }
    Ok(())
}

/// Puts an image tensor on the tape with a batch axis of one.
fn pixels<'t>(tape: &'t Tape, x: &Tensor) -> Result<Var<'t>> {
    let mut shape = vec![1];
    shape.extend_from_slice(x.shape());
    tape.constant(shape, x.data().to_vec())
}

/// One signed-gradient step that increases the classification loss of
/// `label`, with `epsilon` measured on the `[0, 1]` intensity scale.
pub fn fgsm_tensor(net: &Network, x: &Tensor, label: usize, epsilon: f64) -> Result<Tensor> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(arg_err(format!("epsilon must be finite and non-negative, got {epsilon}")));
    }
    check_input(net, x)?;
    let tape = Tape::new();
    let input = pixels(&tape, x)?;
    let (loss, _) = net.loss(&tape, input, &[label])?;
    loss.backward()?;
    let data = x
        .data()
        .iter()
        .zip(input.grad())
        .map(|(&p, g)| {
            let s = if g > 0.0 {
                1.0
            } else if g < 0.0 {
                -1.0
            } else {
                0.0
            };
            (p + epsilon * s).clamp(0.0, 1.0)
        })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

pub fn fgsm_attack(net: &Network, img: &Image, label: usize, epsilon: f64) -> Result<Image> {
    tensor_to_image(&fgsm_tensor(net, &Tensor::from_image(img), label, epsilon)?)
}

/// Sum of squared activations over the selected layers, recorded on `tape`.
fn dream_loss<'t>(net: &Network, tape: &'t Tape, input: Var<'t>, layers: &LayerSelection) -> Result<Var<'t>> {
    let fwd = net.forward_until(tape, input, layers.last())?;
    let mut total = fwd.activations[layers.0[0]].sqnorm();
    for &i in &layers.0[1..] {
        total = total.add(fwd.activations[i].sqnorm())?;
    }
    Ok(total)
}

/// Value of the deep-dream objective for an image tensor.
pub fn dream_objective(net: &Network, x: &Tensor, layers: &LayerSelection) -> Result<f64> {
    check_input(net, x)?;
    let tape = Tape::new();
    Ok(dream_loss(net, &tape, pixels(&tape, x)?, layers)?.item())
}

/// Number of times a dream step halves its rate before giving up.
pub const DREAM_BACKTRACKS: usize = 5;

/// Result of one ascent step.
#[derive(Debug, Clone)]
pub struct DreamStep {
    pub image: Tensor,
    /// Objective before and after the step.
    pub before: f64,
    pub after: f64,
}

/// Normalized gradient ascent on the dream objective:
/// `x + lr * g / (mean|g| + 1e-8)`, clamped to `[0, 1]`. If the objective
/// would drop, the rate is halved up to [`DREAM_BACKTRACKS`] times; when
/// every attempt fails the image is returned unchanged, so the objective
/// never decreases.
pub fn dream_step(net: &Network, x: &Tensor, layers: &LayerSelection, lr: f64) -> Result<DreamStep> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(arg_err(format!("learning rate must be finite and non-negative, got {lr}")));
    }
    check_input(net, x)?;
    let tape = Tape::new();
    let input = pixels(&tape, x)?;
    let loss = dream_loss(net, &tape, input, layers)?;
    let before = loss.item();
    loss.backward()?;
    let g = input.grad();
    let mean_abs = g.iter().map(|v| v.abs()).sum::<f64>() / g.len() as f64;
    let direction: Vec<f64> = g.iter().map(|v| v / (mean_abs + 1e-8)).collect();

    let mut rate = lr;
    for _ in 0..=DREAM_BACKTRACKS {
        let data = x.data().iter().zip(&direction).map(|(p, d)| (p + rate * d).clamp(0.0, 1.0)).collect();
        let candidate = Tensor::new(x.shape().to_vec(), data)?;
        let after = dream_objective(net, &candidate, layers)?;
        if after >= before {
            return Ok(DreamStep { image: candidate, before, after });
        }
        rate /= 2.0;
    }
    Ok(DreamStep { image: x.clone(), before, after: before })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DreamParams {
    pub steps: usize,
    pub lr: f64,
    pub octaves: usize,
    /// Size ratio between consecutive octaves, greater than one.
    pub octave_scale: f64,
}

impl Default for DreamParams {
    fn default() -> Self {
        DreamParams { steps: 20, lr: 0.05, octaves: 3, octave_scale: 1.4 }
    }
}

#[derive(Debug, Clone)]
pub struct Dream {
    pub image: Image,
    /// Objective before each step, octave by octave.
    pub losses: Vec<f64>,
}

fn resize_tensor(t: &Tensor, w: usize, h: usize) -> Result<Tensor> {
    let [c, th, tw] = t.shape()[..] else { unreachable!("checked by caller") };
    let mut data = Vec::with_capacity(c * w * h);
    for plane in t.data().chunks_exact(th * tw) {
        let p = RealImage::new(tw, th, plane.to_vec())?;
        data.extend_from_slice(resize(&p, w, h, InterpMode::Bilinear)?.data());
    }
    Tensor::new(vec![c, h, w], data)
}

/// Deep dream over an image pyramid. Each octave starts from the input
/// resized to that octave plus the detail the previous octaves added,
/// upscaled; the smallest octave comes first.
pub fn deep_dream(net: &Network, img: &Image, layers: &LayerSelection, params: &DreamParams) -> Result<Dream> {
    if params.octaves == 0 {
        return Err(arg_err("need at least one octave"));
    }
    if !(params.octave_scale > 1.0 && params.octave_scale.is_finite()) {
        return Err(arg_err(format!("octave scale must exceed 1, got {}", params.octave_scale)));
    }
    let base = Tensor::from_image(img);
    check_input(net, &base)?;
    let (w, h) = (img.width(), img.height());
    let sizes: Vec<(usize, usize)> = (0..params.octaves)
        .rev()
        .map(|o| {
            let f = params.octave_scale.powi(o as i32);
            ((w as f64 / f).round() as usize, (h as f64 / f).round() as usize)
        })
        .collect();
    if sizes[0].0 == 0 || sizes[0].1 == 0 {
        return Err(arg_err(format!("{w}x{h} image is too small for {} octaves", params.octaves)));
    }

    let mut losses = Vec::new();
    let mut detail: Option<Tensor> = None;
    let mut current = base.clone();
    for &(ow, oh) in &sizes {
        let octave_base = if (ow, oh) == (w, h) { base.clone() } else { resize_tensor(&base, ow, oh)? };
        current = match &detail {
            None => octave_base.clone(),
            Some(d) => {
                let d = resize_tensor(d, ow, oh)?;
                let data = octave_base.data().iter().zip(d.data()).map(|(b, d)| (b + d).clamp(0.0, 1.0)).collect();
                Tensor::new(octave_base.shape().to_vec(), data)?
            }
        };
        for _ in 0..params.steps {
            let step = dream_step(net, &current, layers, params.lr)
                .map_err(|e| arg_err(format!("octave {ow}x{oh}: {e}")))?;
            losses.push(step.before);
            current = step.image;
        }
        let diff = current.data().iter().zip(octave_base.data()).map(|(c, b)| c - b).collect();
        detail = Some(Tensor::new(current.shape().to_vec(), diff)?);
    }
    Ok(Dream { image: tensor_to_image(&current)?, losses })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleParams {
    pub content_weight: f64,
    pub style_weight: f64,
    pub steps: usize,
    pub lr: f64,
}

impl Default for StyleParams {
    fn default() -> Self {
        StyleParams { content_weight: 1.0, style_weight: 1e3, steps: 200, lr: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct Stylized {
    pub image: Image,
    /// Total loss before each step, then after the last one.
    pub losses: Vec<f64>,
    /// Summed squared Gram distance at the start and at the end.
    pub initial_style_distance: f64,
    pub final_style_distance: f64,
}

struct StyleTargets {
    content: Vec<f64>,
    grams: Vec<Vec<f64>>,
}

/// Returns `(total, style distance)` recorded on `tape`.
fn style_loss<'t>(
    net: &Network,
    tape: &'t Tape,
    input: Var<'t>,
    layers: &LayerSelection,
    targets: &StyleTargets,
    params: &StyleParams,
) -> Result<(Var<'t>, Var<'t>)> {
    let fwd = net.forward_until(tape, input, layers.last())?;
    let content_act = fwd.activations[layers.last()];
    let content_target = tape.constant(content_act.shape(), targets.content.clone())?;
    let content = content_act.sub(content_target)?.sqnorm();
    let mut style: Option<Var<'t>> = None;
    for (&i, target) in layers.0.iter().zip(&targets.grams) {
        let g = gram_var(fwd.activations[i])?;
        let t = tape.constant(g.shape(), target.clone())?;
        let d = g.sub(t)?.sqnorm();
        style = Some(match style {
            None => d,
            Some(s) => s.add(d)?,
        });
    }
    let style = style.expect("nonempty selection");
    let total = content.scale(params.content_weight).add(style.scale(params.style_weight))?;
    Ok((total, style))
}

/// Gradient descent on the pixels of a copy of `content` so that its
/// activations at the deepest selected layer stay close to the content
/// image while its Gram matrices at every selected layer approach those of
/// `style`.
pub fn style_transfer(
    net: &Network,
    content: &Image,
    style: &Image,
    layers: &LayerSelection,
    params: &StyleParams,
) -> Result<Stylized> {
    if !(params.lr >= 0.0 && params.lr.is_finite()) {
        return Err(arg_err(format!("learning rate must be finite and non-negative, got {}", params.lr)));
    }
    let content_t = Tensor::from_image(content);
    let style_t = Tensor::from_image(style);
    check_input(net, &content_t)?;
    check_input(net, &style_t)?;
    if content_t.shape() != style_t.shape() {
        return Err(shape_err(format!("content {:?} and style {:?} differ in shape", content_t.shape(), style_t.shape())));
    }
    let targets = {
        let tape = Tape::new();
        let c = net.forward_until(&tape, pixels(&tape, &content_t)?, layers.last())?;
        let s = net.forward_until(&tape, pixels(&tape, &style_t)?, layers.last())?;
        let grams = layers.0.iter().map(|&i| gram_var(s.activations[i]).map(|g| g.value())).collect::<Result<_>>()?;
        StyleTargets { content: c.activations[layers.last()].value(), grams }
    };

    let mut current = content_t;
    let mut losses = Vec::with_capacity(params.steps + 1);
    let mut initial_style_distance = None;
    for _ in 0..params.steps {
        let tape = Tape::new();
        let input = pixels(&tape, &current)?;
        let (total, sd) = style_loss(net, &tape, input, layers, &targets, params)?;
        initial_style_distance.get_or_insert(sd.item());
        losses.push(total.item());
        total.backward()?;
        for (p, g) in current.data_mut().iter_mut().zip(input.grad()) {
            *p = (*p - params.lr * g).clamp(0.0, 1.0);
        }
    }
    let final_style_distance = {
        let tape = Tape::new();
        let (total, sd) = style_loss(net, &tape, pixels(&tape, &current)?, layers, &targets, params)?;
        losses.push(total.item());
        sd.item()
    };
    Ok(Stylized {
        image: tensor_to_image(&current)?,
        losses,
        initial_style_distance: initial_style_distance.unwrap_or(final_style_distance),
        final_style_distance,
    })
}
