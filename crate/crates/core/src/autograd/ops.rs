//! Forward definitions and backward rules.

use super::tape::{Node, Op, Var};
use crate::error::{arg_err, shape_err, Result};

/// Shape bookkeeping for a valid-padding 2-D cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_ch: usize,
    pub h: usize,
    pub w: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    #[inline]
    fn x_at(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.in_ch + c) * self.h + y) * self.w + x
    }

    #[inline]
    fn w_at(&self, o: usize, c: usize, p: usize, q: usize) -> usize {
        ((o * self.in_ch + c) * self.kh + p) * self.kw + q
    }

    #[inline]
    fn out_at(&self, b: usize, o: usize, i: usize, j: usize) -> usize {
        ((b * self.out_ch + o) * self.oh + i) * self.ow + j
    }
}

fn elementwise<'t>(a: Var<'t>, b: Var<'t>, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<(Vec<usize>, Vec<f64>)> {
    if !a.same_tape(&b) {
        return Err(arg_err(format!("{name}: operands recorded on different tapes")));
    }
    let nodes = a.tape.nodes.borrow();
    let (na, nb) = (&nodes[a.id], &nodes[b.id]);
    if na.shape != nb.shape {
        return Err(shape_err(format!("{name}: {:?} vs {:?}", na.shape, nb.shape)));
    }
    Ok((na.shape.clone(), na.value.iter().zip(&nb.value).map(|(&x, &y)| f(x, y)).collect()))
}

fn unary<'t>(a: Var<'t>, f: impl Fn(f64) -> f64) -> (Vec<usize>, Vec<f64>) {
    let nodes = a.tape.nodes.borrow();
    (nodes[a.id].shape.clone(), nodes[a.id].value.iter().map(|&v| f(v)).collect())
}

#[allow(clippy::should_implement_trait)]
impl<'t> Var<'t> {
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let (s, v) = elementwise(self, other, "add", |x, y| x + y)?;
        Ok(self.tape.push(s, v, Op::Add(self.id, other.id)))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let (s, v) = elementwise(self, other, "sub", |x, y| x - y)?;
        Ok(self.tape.push(s, v, Op::Sub(self.id, other.id)))
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (s, v) = elementwise(self, other, "mul", |x, y| x * y)?;
        Ok(self.tape.push(s, v, Op::Mul(self.id, other.id)))
    }

    /// Multiplies by a constant.
    pub fn scale(self, c: f64) -> Var<'t> {
        let (s, v) = unary(self, |x| c * x);
        self.tape.push(s, v, Op::Scale(self.id, c))
    }

    /// Matrix product of `(m, k)` and `(k, n)`.
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        if !self.same_tape(&other) {
            return Err(arg_err("matmul: operands recorded on different tapes"));
        }
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id], &nodes[other.id]);
        let (m, k, k2, n) = match (a.shape.as_slice(), b.shape.as_slice()) {
            ([m, k], [k2, n]) => (*m, *k, *k2, *n),
            _ => return Err(shape_err(format!("matmul needs 2-D operands, got {:?} and {:?}", a.shape, b.shape))),
        };
        if k != k2 {
            return Err(shape_err(format!("matmul inner dimensions {k} and {k2} differ")));
        }
        let out = matmul_raw(&a.value, &b.value, m, k, n);
        drop(nodes);
        Ok(self.tape.push(vec![m, n], out, Op::MatMul { a: self.id, b: other.id, m, k, n }))
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let nodes = self.tape.nodes.borrow();
        let node = &nodes[self.id];
        let [rows, cols] = node.shape[..] else {
            return Err(shape_err(format!("transpose needs a 2-D operand, got {:?}", node.shape)));
        };
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = node.value[r * cols + c];
            }
        }
        drop(nodes);
        Ok(self.tape.push(vec![cols, rows], out, Op::Transpose { a: self.id, rows, cols }))
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Var<'t>> {
        let (old, v) = unary(self, |x| x);
        if super::numel(&shape) != v.len() {
            return Err(shape_err(format!("cannot reshape {old:?} to {shape:?}")));
        }
        Ok(self.tape.push(shape, v, Op::Reshape(self.id)))
    }

    /// Collapses all but the leading (batch) axis.
    pub fn flatten(self) -> Result<Var<'t>> {
        let shape = self.shape();
        let lead = *shape.first().ok_or_else(|| shape_err("cannot flatten a scalar"))?;
        self.reshape(vec![lead, shape[1..].iter().product()])
    }

    pub fn sum(self) -> Var<'t> {
        let s: f64 = self.value().iter().sum();
        self.tape.push(vec![], vec![s], Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t> {
        let v = self.value();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        self.tape.push(vec![], vec![m], Op::Mean(self.id))
    }

    /// Sum of squares.
    pub fn sqnorm(self) -> Var<'t> {
        let s: f64 = self.value().iter().map(|x| x * x).sum();
        self.tape.push(vec![], vec![s], Op::SqNorm(self.id))
    }

    pub fn sigmoid(self) -> Var<'t> {
        let (s, v) = unary(self, sigmoid);
        self.tape.push(s, v, Op::Sigmoid(self.id))
    }

    /// `max(0, x)`; the derivative at exactly 0 is taken as 0.
    pub fn relu(self) -> Var<'t> {
        let (s, v) = unary(self, |x| if x > 0.0 { x } else { 0.0 });
        self.tape.push(s, v, Op::Relu(self.id))
    }

    /// Affine layer `A x + B` for `x` of shape `(n)` or `(batch, n)`, `A` of
    /// shape `(m, n)` and `B` of shape `(m)`.
    pub fn linear(self, w: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
        if !self.same_tape(&w) || !self.same_tape(&b) {
            return Err(arg_err("linear: operands recorded on different tapes"));
        }
        let nodes = self.tape.nodes.borrow();
        let (xn, wn, bn) = (&nodes[self.id], &nodes[w.id], &nodes[b.id]);
        let [out, inp] = wn.shape[..] else {
            return Err(shape_err(format!("linear weight must be 2-D, got {:?}", wn.shape)));
        };
        if bn.shape != [out] {
            return Err(shape_err(format!("linear bias must have shape [{out}], got {:?}", bn.shape)));
        }
        let (batch, out_shape) = match xn.shape[..] {
            [n] if n == inp => (1, vec![out]),
            [bs, n] if n == inp => (bs, vec![bs, out]),
            _ => return Err(shape_err(format!("linear input {:?} does not match weight {:?}", xn.shape, wn.shape))),
        };
        let mut y = Vec::with_capacity(batch * out);
        for s in 0..batch {
            let xs = &xn.value[s * inp..(s + 1) * inp];
            for o in 0..out {
                let row = &wn.value[o * inp..(o + 1) * inp];
                y.push(bn.value[o] + row.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        drop(nodes);
        Ok(self.tape.push(out_shape, y, Op::Linear { x: self.id, w: w.id, b: b.id, batch, inp, out }))
    }

    /// Valid-padding cross-correlation. `self` is `(C, H, W)` or `(B, C, H, W)`,
    /// `filters` is `(O, C, KH, KW)`, `bias` is `(O)`.
    pub fn conv2d(self, filters: Var<'t>, bias: Var<'t>, stride: usize) -> Result<Var<'t>> {
        if !self.same_tape(&filters) || !self.same_tape(&bias) {
            return Err(arg_err("conv2d: operands recorded on different tapes"));
        }
        if stride == 0 {
            return Err(arg_err("conv2d: stride must be at least 1"));
        }
        let nodes = self.tape.nodes.borrow();
        let (xn, wn, bn) = (&nodes[self.id], &nodes[filters.id], &nodes[bias.id]);
        let (batched, batch, in_ch, h, w) = match xn.shape[..] {
            [c, h, w] => (false, 1, c, h, w),
            [b, c, h, w] => (true, b, c, h, w),
            _ => return Err(shape_err(format!("conv2d input must be 3-D or 4-D, got {:?}", xn.shape))),
        };
        let [out_ch, wc, kh, kw] = wn.shape[..] else {
            return Err(shape_err(format!("conv2d filters must be 4-D, got {:?}", wn.shape)));
        };
        if wc != in_ch {
            return Err(shape_err(format!("conv2d filters expect {wc} channels, input has {in_ch}")));
        }
        if bn.shape != [out_ch] {
            return Err(shape_err(format!("conv2d bias must have shape [{out_ch}], got {:?}", bn.shape)));
        }
        if kh > h || kw > w {
            return Err(shape_err(format!("conv2d kernel {kh}x{kw} larger than input {h}x{w}")));
        }
        let g = ConvGeom { batch, in_ch, h, w, out_ch, kh, kw, stride, oh: (h - kh) / stride + 1, ow: (w - kw) / stride + 1 };
        let mut out = vec![0.0; batch * out_ch * g.oh * g.ow];
        for b in 0..batch {
            for o in 0..out_ch {
                for i in 0..g.oh {
                    for j in 0..g.ow {
                        let mut acc = bn.value[o];
                        for c in 0..in_ch {
                            for p in 0..kh {
                                let xrow = g.x_at(b, c, i * stride + p, j * stride);
                                let wrow = g.w_at(o, c, p, 0);
                                for q in 0..kw {
                                    acc += xn.value[xrow + q] * wn.value[wrow + q];
                                }
                            }
                        }
                        out[g.out_at(b, o, i, j)] = acc;
                    }
                }
            }
        }
        drop(nodes);
        let shape = if batched { vec![batch, out_ch, g.oh, g.ow] } else { vec![out_ch, g.oh, g.ow] };
        Ok(self.tape.push(shape, out, Op::Conv2d { x: self.id, w: filters.id, b: bias.id, geom: g }))
    }

    /// Max over `window x window` blocks of the two trailing axes. Gradient
    /// goes to the first maximal cell in row-major order.
    pub fn maxpool2d(self, window: usize, stride: usize) -> Result<Var<'t>> {
        if window == 0 || stride == 0 {
            return Err(arg_err("maxpool: window and stride must be positive"));
        }
        let nodes = self.tape.nodes.borrow();
        let xn = &nodes[self.id];
        if xn.shape.len() < 2 {
            return Err(shape_err(format!("maxpool needs at least 2-D input, got {:?}", xn.shape)));
        }
        let nd = xn.shape.len();
        let (h, w) = (xn.shape[nd - 2], xn.shape[nd - 1]);
        if window > h || window > w {
            return Err(shape_err(format!("maxpool window {window} larger than {h}x{w}")));
        }
        let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
        let planes = xn.value.len() / (h * w);
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + i * stride * w + j * stride;
                    for y in i * stride..i * stride + window {
                        for x in j * stride..j * stride + window {
                            let idx = base + y * w + x;
                            if xn.value[idx] > xn.value[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(xn.value[best]);
                    argmax.push(best);
                }
            }
        }
        let mut shape = xn.shape.clone();
        shape[nd - 2] = oh;
        shape[nd - 1] = ow;
        drop(nodes);
        Ok(self.tape.push(shape, out, Op::MaxPool { x: self.id, argmax }))
    }

    /// Mean softmax cross-entropy of logits `(K)` or `(B, K)` against class indices.
    pub fn softmax_cross_entropy(self, labels: &[usize]) -> Result<Var<'t>> {
        let shape = self.shape();
        let (batch, classes) = match shape[..] {
            [k] => (1, k),
            [b, k] => (b, k),
            _ => return Err(shape_err(format!("logits must be 1-D or 2-D, got {shape:?}"))),
        };
        if labels.len() != batch {
            return Err(shape_err(format!("{} labels for batch of {batch}", labels.len())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(arg_err(format!("label {l} out of range for {classes} classes")));
        }
        let logits = self.value();
        let mut probs = Vec::with_capacity(logits.len());
        let mut loss = 0.0;
        for (row, &label) in logits.chunks_exact(classes).zip(labels) {
            let p = softmax(row);
            let lse = log_sum_exp(row);
            loss += lse - row[label];
            probs.extend(p);
        }
        loss /= batch as f64;
        Ok(self.tape.push(
            vec![],
            vec![loss],
            Op::SoftmaxCe { logits: self.id, probs, labels: labels.to_vec(), classes },
        ))
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against targets in `[0, 1]`.
    pub fn bce_with_logits(self, targets: &[f64]) -> Result<Var<'t>> {
        let z = self.value();
        if z.len() != targets.len() {
            return Err(shape_err(format!("{} targets for {} logits", targets.len(), z.len())));
        }
        let loss = z
            .iter()
            .zip(targets)
            .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            / z.len() as f64;
        Ok(self.tape.push(vec![], vec![loss], Op::BceWithLogits { logits: self.id, targets: targets.to_vec() }))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            for j in 0..n {
                out[i * n + j] += aip * b[p * n + j];
            }
        }
    }
    out
}

fn acc<'a>(adj: &'a mut [Option<Vec<f64>>], nodes: &[Node], id: usize) -> &'a mut Vec<f64> {
    adj[id].get_or_insert_with(|| vec![0.0; nodes[id].value.len()])
}

/// Pushes the upstream gradient `g` of node `id` onto its inputs.
pub(crate) fn backprop(nodes: &[Node], id: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
    let node = &nodes[id];
    match &node.op {
        Op::Leaf => {}
        &Op::Add(a, b) => {
            acc(adj, nodes, a).iter_mut().zip(g).for_each(|(d, g)| *d += g);
            acc(adj, nodes, b).iter_mut().zip(g).for_each(|(d, g)| *d += g);
        }
        &Op::Sub(a, b) => {
            acc(adj, nodes, a).iter_mut().zip(g).for_each(|(d, g)| *d += g);
            acc(adj, nodes, b).iter_mut().zip(g).for_each(|(d, g)| *d -= g);
        }
        &Op::Mul(a, b) => {
            let (va, vb) = (&nodes[a].value, &nodes[b].value);
            acc(adj, nodes, a).iter_mut().zip(g).zip(vb).for_each(|((d, g), y)| *d += g * y);
            acc(adj, nodes, b).iter_mut().zip(g).zip(va).for_each(|((d, g), x)| *d += g * x);
        }
        &Op::Scale(a, c) => {
            acc(adj, nodes, a).iter_mut().zip(g).for_each(|(d, g)| *d += c * g);
        }
        &Op::MatMul { a, b, m, k, n } => {
            let (va, vb) = (&nodes[a].value, &nodes[b].value);
            let da = acc(adj, nodes, a);
            for i in 0..m {
                for p in 0..k {
                    da[i * k + p] += (0..n).map(|j| g[i * n + j] * vb[p * n + j]).sum::<f64>();
                }
            }
            let db = acc(adj, nodes, b);
            for p in 0..k {
                for j in 0..n {
                    db[p * n + j] += (0..m).map(|i| va[i * k + p] * g[i * n + j]).sum::<f64>();
                }
            }
        }
        &Op::Transpose { a, rows, cols } => {
            let da = acc(adj, nodes, a);
            for r in 0..rows {
                for c in 0..cols {
                    da[r * cols + c] += g[c * rows + r];
                }
            }
        }
        &Op::Reshape(a) => {
            acc(adj, nodes, a).iter_mut().zip(g).for_each(|(d, g)| *d += g);
        }
        &Op::Sum(a) => {
            acc(adj, nodes, a).iter_mut().for_each(|d| *d += g[0]);
        }
        &Op::Mean(a) => {
            let n = nodes[a].value.len() as f64;
            acc(adj, nodes, a).iter_mut().for_each(|d| *d += g[0] / n);
        }
        &Op::SqNorm(a) => {
            let va = &nodes[a].value;
            acc(adj, nodes, a).iter_mut().zip(va).for_each(|(d, x)| *d += 2.0 * x * g[0]);
        }
        &Op::Sigmoid(a) => {
            let y = &node.value;
            acc(adj, nodes, a).iter_mut().zip(g).zip(y).for_each(|((d, g), y)| *d += g * y * (1.0 - y));
        }
        &Op::Relu(a) => {
            let x = &nodes[a].value;
            acc(adj, nodes, a).iter_mut().zip(g).zip(x).for_each(|((d, g), &x)| {
                if x > 0.0 {
                    *d += g
                }
            });
        }
        &Op::Linear { x, w, b, batch, inp, out } => {
            let (vx, vw) = (&nodes[x].value, &nodes[w].value);
            let dx = acc(adj, nodes, x);
            for s in 0..batch {
                for o in 0..out {
                    let go = g[s * out + o];
                    for i in 0..inp {
                        dx[s * inp + i] += go * vw[o * inp + i];
                    }
                }
            }
            let dw = acc(adj, nodes, w);
            for s in 0..batch {
                for o in 0..out {
                    let go = g[s * out + o];
                    for i in 0..inp {
                        dw[o * inp + i] += go * vx[s * inp + i];
                    }
                }
            }
            let db = acc(adj, nodes, b);
            for s in 0..batch {
                for o in 0..out {
                    db[o] += g[s * out + o];
                }
            }
        }
        Op::Conv2d { x, w, b, geom } => {
            let (x, w, b, c) = (*x, *w, *b, *geom);
            let (vx, vw) = (&nodes[x].value, &nodes[w].value);
            let mut dx = vec![0.0; vx.len()];
            let mut dw = vec![0.0; vw.len()];
            let mut db = vec![0.0; c.out_ch];
            for bi in 0..c.batch {
                for o in 0..c.out_ch {
                    for i in 0..c.oh {
                        for j in 0..c.ow {
                            let go = g[c.out_at(bi, o, i, j)];
                            if go == 0.0 {
                                continue;
                            }
                            db[o] += go;
                            for ch in 0..c.in_ch {
                                for p in 0..c.kh {
                                    let xrow = c.x_at(bi, ch, i * c.stride + p, j * c.stride);
                                    let wrow = c.w_at(o, ch, p, 0);
                                    for q in 0..c.kw {
                                        dx[xrow + q] += go * vw[wrow + q];
                                        dw[wrow + q] += go * vx[xrow + q];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            acc(adj, nodes, x).iter_mut().zip(&dx).for_each(|(d, v)| *d += v);
            acc(adj, nodes, w).iter_mut().zip(&dw).for_each(|(d, v)| *d += v);
            acc(adj, nodes, b).iter_mut().zip(&db).for_each(|(d, v)| *d += v);
        }
        Op::MaxPool { x, argmax } => {
            let dx = acc(adj, nodes, *x);
            for (&src, g) in argmax.iter().zip(g) {
                dx[src] += g;
            }
        }
        Op::SoftmaxCe { logits, probs, labels, classes } => {
            let batch = labels.len() as f64;
            let dl = acc(adj, nodes, *logits);
            for (s, &label) in labels.iter().enumerate() {
                for k in 0..*classes {
                    let onehot = if k == label { 1.0 } else { 0.0 };
                    dl[s * classes + k] += g[0] * (probs[s * classes + k] - onehot) / batch;
                }
            }
        }
        Op::BceWithLogits { logits, targets } => {
            let z = &nodes[*logits].value;
            let n = z.len() as f64;
            let dl = acc(adj, nodes, *logits);
            for ((d, &z), &t) in dl.iter_mut().zip(z).zip(targets) {
                *d += g[0] * (sigmoid(z) - t) / n;
            }
        }
    }
}
