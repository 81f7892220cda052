//! Binary weights format.
//!
//! Layout: the magic bytes, a `u32` layer count, then per layer a `u8` kind
//! tag, a `u32` count of integer hyper-parameters followed by those values
//! (`[stride]` for conv, `[window, stride]` for pooling), a `u32` tensor
//! count and, per tensor, a `u32` rank, the `u32` dims and the values as
//! `f64`. All integers and reals are little-endian.

use super::{Layer, Network};
use crate::autograd::Tensor;
use crate::error::{shape_err, Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 5] = b"PXFG1";

const DENSE: u8 = 1;
const CONV: u8 = 2;
const MAXPOOL: u8 = 3;
const RELU: u8 = 4;
const FLATTEN: u8 = 5;
const SIGMOID: u8 = 6;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn save_weights(net: &Network) -> Vec<u8> {
    let mut out = WEIGHTS_MAGIC.to_vec();
    put_u32(&mut out, net.layers.len());
    for layer in &net.layers {
        let (tag, hyper): (u8, Vec<usize>) = match layer {
            Layer::Dense { .. } => (DENSE, vec![]),
            Layer::Conv { stride, .. } => (CONV, vec![*stride]),
            Layer::MaxPool { window, stride } => (MAXPOOL, vec![*window, *stride]),
            Layer::Relu => (RELU, vec![]),
            Layer::Flatten => (FLATTEN, vec![]),
            Layer::Sigmoid => (SIGMOID, vec![]),
        };
        out.push(tag);
        put_u32(&mut out, hyper.len());
        hyper.iter().for_each(|&h| put_u32(&mut out, h));
        let params = layer.params();
        put_u32(&mut out, params.len());
        for t in params {
            put_u32(&mut out, t.shape().len());
            t.shape().iter().for_each(|&d| put_u32(&mut out, d));
            t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("weights truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()?;
        let shape = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = n.filter(|&n| n <= (self.bytes.len() - self.pos) / 8);
        let n = n.ok_or_else(|| Error::Format(format!("tensor of shape {shape:?} exceeds the remaining bytes")))?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
    }
}

fn decode(bytes: &[u8]) -> Result<Vec<Layer>> {
    if bytes.is_empty() {
        return Err(Error::Format("empty weights stream".into()));
    }
    let mut r = Reader { bytes, pos: 0 };
    if r.take(WEIGHTS_MAGIC.len()).ok() != Some(&WEIGHTS_MAGIC[..]) {
        return Err(Error::Format("missing PXFG1 magic".into()));
    }
    let count = r.u32()?;
    let mut layers = Vec::new();
    for i in 0..count {
        let tag = r.u8()?;
        let hyper = (0..r.u32()?).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let tensors = (0..r.u32()?).map(|_| r.tensor()).collect::<Result<Vec<_>>>()?;
        let bad = || Error::Format(format!("layer {i}: malformed record for tag {tag}"));
        let layer = match (tag, hyper.as_slice(), tensors.len()) {
            (DENSE, [], 2) => {
                let mut t = tensors.into_iter();
                Layer::Dense { weight: t.next().unwrap(), bias: t.next().unwrap() }
            }
            (CONV, &[stride], 2) => {
                let mut t = tensors.into_iter();
                Layer::Conv { filters: t.next().unwrap(), bias: t.next().unwrap(), stride }
            }
            (MAXPOOL, &[window, stride], 0) => Layer::MaxPool { window, stride },
            (RELU, [], 0) => Layer::Relu,
            (FLATTEN, [], 0) => Layer::Flatten,
            (SIGMOID, [], 0) => Layer::Sigmoid,
            _ => return Err(bad()),
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after the last layer", bytes.len() - r.pos)));
    }
    Ok(layers)
}

/// Overwrites the parameters of `net` with those in `bytes`. The stored
/// layout must match the network's architecture exactly; on any mismatch
/// `net` is left untouched.
pub fn load_weights(net: &mut Network, bytes: &[u8]) -> Result<()> {
    let stored = decode(bytes)?;
    if stored.len() != net.layers.len() {
        return Err(shape_err(format!("weights hold {} layers, network has {}", stored.len(), net.layers.len())));
    }
    for (i, (have, got)) in net.layers.iter().zip(&stored).enumerate() {
        let same_kind = match (have, got) {
            (Layer::Conv { stride: a, .. }, Layer::Conv { stride: b, .. }) => a == b,
            (Layer::MaxPool { .. }, Layer::MaxPool { .. }) => have == got,
            _ => have.name() == got.name(),
        };
        if !same_kind {
            return Err(shape_err(format!("layer {i}: expected {:?}, found {:?} in weights", kind(have), kind(got))));
        }
        for (p, q) in have.params().iter().zip(got.params()) {
            if p.shape() != q.shape() {
                return Err(shape_err(format!(
                    "layer {i} ({}): parameter shape {:?} does not match stored {:?}",
                    have.name(),
                    p.shape(),
                    q.shape()
                )));
            }
        }
    }
    for (have, got) in net.layers.iter_mut().zip(stored) {
        for (p, q) in have.params_mut().into_iter().zip(got.params()) {
            p.data_mut().copy_from_slice(q.data());
        }
    }
    Ok(())
}

fn kind(layer: &Layer) -> String {
    match layer {
        Layer::Conv { stride, .. } => format!("conv(stride {stride})"),
        Layer::MaxPool { window, stride } => format!("maxpool({window}, stride {stride})"),
        other => other.name().to_string(),
    }
}

impl Network {
    /// Rebuilds a network, architecture included, from saved weights.
    pub fn from_weights(bytes: &[u8]) -> Result<Network> {
        Network::new(decode(bytes)?)
    }
}
