use std::cell::RefCell;
use std::fmt;

use super::{numel, Tensor};
use crate::error::{shape_err, Result};

/// Recorded operation, holding input node ids and whatever the backward
/// rule needs from the forward pass.
#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MatMul { a: usize, b: usize, m: usize, k: usize, n: usize },
    Transpose { a: usize, rows: usize, cols: usize },
    Reshape(usize),
    Sum(usize),
    Mean(usize),
    SqNorm(usize),
    Sigmoid(usize),
    Relu(usize),
    Linear { x: usize, w: usize, b: usize, batch: usize, inp: usize, out: usize },
    Conv2d { x: usize, w: usize, b: usize, geom: super::ops::ConvGeom },
    MaxPool { x: usize, argmax: Vec<usize> },
    SoftmaxCe { logits: usize, probs: Vec<f64>, labels: Vec<usize>, classes: usize },
    BceWithLogits { logits: usize, targets: Vec<f64> },
}

#[derive(Debug)]
pub(crate) struct Node {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub op: Op,
}

/// Ordered record of one forward computation.
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.nodes.borrow().len()).finish()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn push(&self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var<'_> {
        debug_assert_eq!(numel(&shape), value.len());
        let mut nodes = self.nodes.borrow_mut();
        let n = value.len();
        nodes.push(Node { shape, value, grad: vec![0.0; n], op });
        Var { tape: self, id: nodes.len() - 1 }
    }

    /// Records the current values of `t` as a leaf.
    pub fn param(&self, t: &Tensor) -> Var<'_> {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf)
    }

    /// Leaf from raw values.
    pub fn constant(&self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var<'_>> {
        if numel(&shape) != data.len() {
            return Err(shape_err(format!("shape {:?} holds {} values, got {}", shape, numel(&shape), data.len())));
        }
        Ok(self.push(shape, data, Op::Leaf))
    }

    /// Resets every accumulated gradient to exactly zero.
    pub fn zero_grad(&self) {
        for n in self.nodes.borrow_mut().iter_mut() {
            n.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.tape.nodes.borrow()[self.id].value.len()
    }

    pub fn value(&self) -> Vec<f64> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    /// First element; the value of a scalar.
    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value[0]
    }

    /// Accumulated `d loss / d self` from all backward passes so far.
    pub fn grad(&self) -> Vec<f64> {
        self.tape.nodes.borrow()[self.id].grad.clone()
    }

    /// Copies value and shape out into a fresh tensor.
    pub fn to_tensor(&self) -> Tensor {
        let nodes = self.tape.nodes.borrow();
        Tensor::new(nodes[self.id].shape.clone(), nodes[self.id].value.clone()).expect("node shape is consistent")
    }

    pub(crate) fn same_tape(&self, other: &Var<'_>) -> bool {
        std::ptr::eq(self.tape, other.tape)
    }

    /// Reverse sweep from a scalar. Gradients add onto whatever earlier
    /// passes left in each node.
    pub fn backward(&self) -> Result<()> {
        let nodes = self.tape.nodes.borrow();
        if nodes[self.id].value.len() != 1 {
            return Err(shape_err(format!("backward needs a scalar, got shape {:?}", nodes[self.id].shape)));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.id + 1];
        adj[self.id] = Some(vec![1.0]);
        let mut finished: Vec<(usize, Vec<f64>)> = Vec::new();
        for id in (0..=self.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            super::ops::backprop(&nodes, id, &g, &mut adj);
            finished.push((id, g));
        }
        drop(nodes);
        let mut nodes = self.tape.nodes.borrow_mut();
        for (id, g) in finished {
            nodes[id].grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }
}
