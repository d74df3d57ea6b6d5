//! Dynamic reverse-mode tape.
//!
//! Every operation on a [`Var`] evaluates eagerly and appends a node holding
//! its value and the recipe for its vector-Jacobian product. [`Tape::backward`]
//! replays the nodes in reverse. A tape is rebuilt for every forward pass.

use std::cell::{Ref, RefCell};
use std::fmt;

use crate::error::{Result, TensorError};
use crate::kernels;
use crate::tensor::{broadcast_map, check_shape, permute_map, Tensor};

/// Pointwise nonlinearity used by the MLPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    /// tanh approximation of GELU
    Gelu,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => {
                let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                0.5 * x * (1.0 + t)
            }
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
            }
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Sum(usize),
    Mean(usize),
    Sqrt(usize),
    Abs(usize),
    Square(usize),
    MatMul(usize, usize),
    Softmax(usize),
    Permute { src: usize, map: Vec<usize> },
    Reshape(usize),
    BroadcastTo { src: usize, map: Vec<usize> },
    ConcatLast(Vec<usize>),
    SliceLast { src: usize, start: usize },
    Act(usize, Activation),
    LayerNorm { x: usize, gamma: usize, beta: usize, normed: Vec<f64>, rstd: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of executed operations for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
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

    /// Leaf that receives a gradient.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.var(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.var(value, false)
    }

    pub fn var(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        self.push(value, Op::Leaf, requires_grad)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        assert!(std::ptr::eq(loss.tape, self), "loss recorded on a different tape");
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(nodes.len());
        grads.resize_with(nodes.len(), || None);
        let mut leaves: Vec<Option<Tensor>> = Vec::new();
        leaves.resize_with(nodes.len(), || None);
        if root.requires_grad {
            grads[loss.id] = Some(vec![1.0]);
        }

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if let Op::Leaf = node.op {
                let t = Tensor::checked("backward", node.value.shape().to_vec(), g)?;
                leaves[id] = Some(t);
                continue;
            }
            propagate(&nodes, id, &g, &mut grads);
        }
        Ok(Gradients { grads: leaves })
    }
}

fn accumulate(
    nodes: &[Node],
    grads: &mut [Option<Vec<f64>>],
    id: usize,
    f: impl FnOnce(&mut [f64]),
) {
    if !nodes[id].requires_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| vec![0.0; nodes[id].value.len()]);
    f(slot);
}

fn propagate(nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let node = &nodes[id];
    let out = node.value.data();
    match &node.op {
        Op::Leaf => unreachable!(),
        Op::Add(a, b) => {
            accumulate(nodes, grads, *a, |s| kernels::axpy(s, g, 1.0));
            accumulate(nodes, grads, *b, |s| kernels::axpy(s, g, 1.0));
        }
        Op::Sub(a, b) => {
            accumulate(nodes, grads, *a, |s| kernels::axpy(s, g, 1.0));
            accumulate(nodes, grads, *b, |s| kernels::axpy(s, g, -1.0));
        }
        Op::Mul(a, b) => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            accumulate(nodes, grads, *a, |s| {
                s.iter_mut().zip(g).zip(bv).for_each(|((s, g), b)| *s += g * b)
            });
            accumulate(nodes, grads, *b, |s| {
                s.iter_mut().zip(g).zip(av).for_each(|((s, g), a)| *s += g * a)
            });
        }
        Op::Scale(a, c) => accumulate(nodes, grads, *a, |s| kernels::axpy(s, g, *c)),
        Op::Sum(a) => accumulate(nodes, grads, *a, |s| s.iter_mut().for_each(|v| *v += g[0])),
        Op::Mean(a) => {
            let n = nodes[*a].value.len() as f64;
            accumulate(nodes, grads, *a, |s| s.iter_mut().for_each(|v| *v += g[0] / n))
        }
        Op::Sqrt(a) => accumulate(nodes, grads, *a, |s| {
            s.iter_mut().zip(g).zip(out).for_each(|((s, g), y)| *s += g * 0.5 / y)
        }),
        Op::Abs(a) => {
            let av = nodes[*a].value.data();
            accumulate(nodes, grads, *a, |s| {
                s.iter_mut().zip(g).zip(av).for_each(|((s, g), x)| {
                    if *x > 0.0 {
                        *s += g
                    } else if *x < 0.0 {
                        *s -= g
                    }
                })
            })
        }
        Op::Square(a) => {
            let av = nodes[*a].value.data();
            accumulate(nodes, grads, *a, |s| {
                s.iter_mut().zip(g).zip(av).for_each(|((s, g), x)| *s += 2.0 * g * x)
            })
        }
        Op::MatMul(a, b) => {
            let at = &nodes[*a].value;
            let bt = &nodes[*b].value;
            let plan = kernels::MatMulPlan::new(at.shape(), bt.shape())
                .expect("shapes were validated in forward");
            if nodes[*a].requires_grad {
                let mut ga = grads[*a].take().unwrap_or_else(|| vec![0.0; at.len()]);
                plan.grad_a(g, bt.data(), &mut ga);
                grads[*a] = Some(ga);
            }
            if nodes[*b].requires_grad {
                let mut gb = grads[*b].take().unwrap_or_else(|| vec![0.0; bt.len()]);
                plan.grad_b(g, at.data(), &mut gb);
                grads[*b] = Some(gb);
            }
        }
        Op::Softmax(a) => {
            let n = *node.value.shape().last().unwrap();
            accumulate(nodes, grads, *a, |s| {
                for ((s, g), y) in s.chunks_mut(n).zip(g.chunks(n)).zip(out.chunks(n)) {
                    let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
                    for j in 0..n {
                        s[j] += y[j] * (g[j] - dot);
                    }
                }
            })
        }
        Op::Permute { src, map } | Op::BroadcastTo { src, map } => {
            accumulate(nodes, grads, *src, |s| {
                for (i, &m) in map.iter().enumerate() {
                    s[m] += g[i];
                }
            })
        }
        Op::Reshape(a) => accumulate(nodes, grads, *a, |s| kernels::axpy(s, g, 1.0)),
        Op::ConcatLast(parts) => {
            let n = *node.value.shape().last().unwrap();
            let rows = g.len() / n;
            let mut offset = 0;
            for &p in parts {
                let w = *nodes[p].value.shape().last().unwrap();
                accumulate(nodes, grads, p, |s| {
                    for r in 0..rows {
                        kernels::axpy(&mut s[r * w..(r + 1) * w], &g[r * n + offset..r * n + offset + w], 1.0);
                    }
                });
                offset += w;
            }
        }
        Op::SliceLast { src, start } => {
            let w = *node.value.shape().last().unwrap();
            let n = *nodes[*src].value.shape().last().unwrap();
            let rows = g.len() / w;
            accumulate(nodes, grads, *src, |s| {
                for r in 0..rows {
                    kernels::axpy(&mut s[r * n + start..r * n + start + w], &g[r * w..(r + 1) * w], 1.0);
                }
            })
        }
        Op::Act(a, act) => {
            let av = nodes[*a].value.data();
            accumulate(nodes, grads, *a, |s| {
                s.iter_mut()
                    .zip(g)
                    .zip(av)
                    .for_each(|((s, g), x)| *s += g * act.derivative(*x))
            })
        }
        Op::LayerNorm { x, gamma, beta, normed, rstd } => {
            let d = *node.value.shape().last().unwrap();
            let gam = nodes[*gamma].value.data();
            accumulate(nodes, grads, *beta, |s| {
                for row in g.chunks(d) {
                    kernels::axpy(s, row, 1.0);
                }
            });
            accumulate(nodes, grads, *gamma, |s| {
                for (row, nrow) in g.chunks(d).zip(normed.chunks(d)) {
                    for j in 0..d {
                        s[j] += row[j] * nrow[j];
                    }
                }
            });
            accumulate(nodes, grads, *x, |s| {
                let mut gn = vec![0.0; d];
                for (r, ((srow, grow), nrow)) in
                    s.chunks_mut(d).zip(g.chunks(d)).zip(normed.chunks(d)).enumerate()
                {
                    for j in 0..d {
                        gn[j] = grow[j] * gam[j];
                    }
                    let mean_gn = gn.iter().sum::<f64>() / d as f64;
                    let mean_gn_n = gn.iter().zip(nrow).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    for j in 0..d {
                        srow[j] += rstd[r] * (gn[j] - mean_gn - nrow[j] * mean_gn_n);
                    }
                }
            });
        }
    }
}

/// Gradients of the requires-grad leaves reached by a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Gradient of `var`, zero-filled if the sweep never reached it.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        match self.get(var) {
            Some(t) => t.clone(),
            None => {
                let shape = var.shape();
                Tensor::zeros(&shape)
            }
        }
    }

    pub fn take(&mut self, var: Var<'_>) -> Tensor {
        match self.grads.get_mut(var.id).and_then(Option::take) {
            Some(t) => t,
            None => Tensor::zeros(&var.shape()),
        }
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn to_tensor(&self) -> Tensor {
        self.value().clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn same_tape(&self, other: &Var<'_>) {
        assert!(std::ptr::eq(self.tape, other.tape), "vars recorded on different tapes");
    }

    fn unary(self, op_name: &'static str, op: Op, shape: Vec<usize>, data: Vec<f64>) -> Result<Var<'t>> {
        let value = Tensor::checked(op_name, shape, data)?;
        let req = self.requires_grad();
        Ok(self.tape.push(value, op, req))
    }

    fn binary_same_shape(
        self,
        other: Var<'t>,
        op_name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'t>> {
        self.same_tape(&other);
        let (shape, data) = {
            let a = self.value();
            let b = other.value();
            if a.shape() != b.shape() {
                return Err(TensorError::dim(
                    op_name,
                    format!("shapes {:?} and {:?} differ", a.shape(), b.shape()),
                ));
            }
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
            (a.shape().to_vec(), data)
        };
        let value = Tensor::checked(op_name, shape, data)?;
        let req = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(value, op, req))
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary_same_shape(other, "add", Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary_same_shape(other, "sub", Op::Sub(self.id, other.id), |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary_same_shape(other, "mul", Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        let (shape, data) = {
            let a = self.value();
            (a.shape().to_vec(), a.data().iter().map(|v| v * c).collect())
        };
        self.unary("scale", Op::Scale(self.id, c), shape, data)
    }

    pub fn sum(self) -> Result<Var<'t>> {
        let s = self.value().sum();
        self.unary("sum", Op::Sum(self.id), Vec::new(), vec![s])
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let m = self.value().mean();
        self.unary("mean", Op::Mean(self.id), Vec::new(), vec![m])
    }

    pub fn sqrt(self) -> Result<Var<'t>> {
        let (shape, data) = {
            let a = self.value();
            (a.shape().to_vec(), a.data().iter().map(|v| v.sqrt()).collect::<Vec<_>>())
        };
        self.unary("sqrt", Op::Sqrt(self.id), shape, data)
    }

    pub fn abs(self) -> Result<Var<'t>> {
        let (shape, data) = {
            let a = self.value();
            (a.shape().to_vec(), a.data().iter().map(|v| v.abs()).collect())
        };
        self.unary("abs", Op::Abs(self.id), shape, data)
    }

    pub fn square(self) -> Result<Var<'t>> {
        let (shape, data) = {
            let a = self.value();
            (a.shape().to_vec(), a.data().iter().map(|v| v * v).collect())
        };
        self.unary("square", Op::Square(self.id), shape, data)
    }

    pub fn activation(self, act: Activation) -> Result<Var<'t>> {
        let (shape, data) = {
            let a = self.value();
            (a.shape().to_vec(), a.data().iter().map(|&v| act.apply(v)).collect())
        };
        self.unary("activation", Op::Act(self.id, act), shape, data)
    }

    /// `[.., m, k] x [.., k, n] -> [.., m, n]` with broadcast batch extents.
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other);
        let (shape, data) = {
            let a = self.value();
            let b = other.value();
            let plan = kernels::MatMulPlan::new(a.shape(), b.shape())?;
            let data = plan.forward(a.data(), b.data());
            (plan.out_shape(), data)
        };
        let value = Tensor::checked("matmul", shape, data)?;
        let req = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(value, Op::MatMul(self.id, other.id), req))
    }

    /// Max-stabilized softmax over the last axis.
    pub fn softmax_last(self) -> Result<Var<'t>> {
        let (shape, data) = {
            let a = self.value();
            let n = match a.shape().last() {
                Some(&n) => n,
                None => return Err(TensorError::dim("softmax_last", "scalar has no last axis")),
            };
            let mut out = a.data().to_vec();
            for row in out.chunks_mut(n) {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                row.iter_mut().for_each(|v| *v /= total);
            }
            (a.shape().to_vec(), out)
        };
        self.unary("softmax_last", Op::Softmax(self.id), shape, data)
    }

    /// Same values, cut from the graph: nothing upstream receives gradient through it.
    pub fn stop_gradient(self) -> Var<'t> {
        let value = self.to_tensor();
        self.tape.push(value, Op::Leaf, false)
    }

    pub fn permute(self, axes: &[usize]) -> Result<Var<'t>> {
        let (shape, map, data) = {
            let a = self.value();
            let (shape, map) = permute_map("permute", a.shape(), axes)?;
            let data = map.iter().map(|&i| a.data()[i]).collect();
            (shape, map, data)
        };
        self.unary("permute", Op::Permute { src: self.id, map }, shape, data)
    }

    pub fn swap_axes(self, i: usize, j: usize) -> Result<Var<'t>> {
        let rank = self.value().rank();
        if i >= rank || j >= rank {
            return Err(TensorError::dim(
                "swap_axes",
                format!("axes ({}, {}) out of range for rank {}", i, j, rank),
            ));
        }
        let mut axes: Vec<usize> = (0..rank).collect();
        axes.swap(i, j);
        self.permute(&axes)
    }

    pub fn transpose_last_two(self) -> Result<Var<'t>> {
        let rank = self.value().rank();
        if rank < 2 {
            return Err(TensorError::dim("transpose_last_two", format!("rank {} < 2", rank)));
        }
        self.swap_axes(rank - 2, rank - 1)
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let data = {
            let a = self.value();
            check_shape("reshape", shape)?;
            if shape.iter().product::<usize>() != a.len() {
                return Err(TensorError::dim(
                    "reshape",
                    format!("cannot view {:?} as {:?}", a.shape(), shape),
                ));
            }
            a.data().to_vec()
        };
        self.unary("reshape", Op::Reshape(self.id), shape.to_vec(), data)
    }

    /// Explicit broadcast (numpy alignment from the right); gradient sums back.
    pub fn broadcast_to(self, shape: &[usize]) -> Result<Var<'t>> {
        let (map, data) = {
            let a = self.value();
            check_shape("broadcast_to", shape)?;
            let map = broadcast_map("broadcast_to", a.shape(), shape)?;
            let data = map.iter().map(|&i| a.data()[i]).collect();
            (map, data)
        };
        self.unary("broadcast_to", Op::BroadcastTo { src: self.id, map }, shape.to_vec(), data)
    }

    /// Adds `other` after broadcasting it to this var's shape.
    pub fn add_broadcast(self, other: Var<'t>) -> Result<Var<'t>> {
        let shape = self.shape();
        if other.shape() == shape {
            return self.add(other);
        }
        self.add(other.broadcast_to(&shape)?)
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice_last(self, start: usize, len: usize) -> Result<Var<'t>> {
        let (shape, data) = {
            let a = self.value();
            let n = match a.shape().last() {
                Some(&n) => n,
                None => return Err(TensorError::dim("slice_last", "scalar has no last axis")),
            };
            if len == 0 || start + len > n {
                return Err(TensorError::dim(
                    "slice_last",
                    format!("range {}..{} outside last extent {}", start, start + len, n),
                ));
            }
            let data = a.data().chunks(n).flat_map(|r| r[start..start + len].iter().copied()).collect();
            let mut shape = a.shape().to_vec();
            *shape.last_mut().unwrap() = len;
            (shape, data)
        };
        self.unary("slice_last", Op::SliceLast { src: self.id, start }, shape, data)
    }

    pub fn split_last(self, sizes: &[usize]) -> Result<Vec<Var<'t>>> {
        let n = *self.shape().last().unwrap_or(&0);
        if sizes.iter().sum::<usize>() != n {
            return Err(TensorError::dim(
                "split_last",
                format!("sizes {:?} do not partition extent {}", sizes, n),
            ));
        }
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &s in sizes {
            out.push(self.slice_last(start, s)?);
            start += s;
        }
        Ok(out)
    }

    /// Layer normalization over the last axis with affine `gamma`, `beta` of shape `[d]`.
    pub fn layer_norm(self, gamma: Var<'t>, beta: Var<'t>, eps: f64) -> Result<Var<'t>> {
        self.same_tape(&gamma);
        self.same_tape(&beta);
        let (shape, data, normed, rstd) = {
            let x = self.value();
            let d = match x.shape().last() {
                Some(&d) => d,
                None => return Err(TensorError::dim("layer_norm", "scalar input")),
            };
            let g = gamma.value();
            let b = beta.value();
            if g.shape() != [d] || b.shape() != [d] {
                return Err(TensorError::dim(
                    "layer_norm",
                    format!("gamma {:?} / beta {:?} vs last extent {}", g.shape(), b.shape(), d),
                ));
            }
            let rows = x.len() / d;
            let mut normed = vec![0.0; x.len()];
            let mut out = vec![0.0; x.len()];
            let mut rstd = vec![0.0; rows];
            for r in 0..rows {
                let row = &x.data()[r * d..(r + 1) * d];
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let rs = 1.0 / (var + eps).sqrt();
                rstd[r] = rs;
                for j in 0..d {
                    let n = (row[j] - mean) * rs;
                    normed[r * d + j] = n;
                    out[r * d + j] = n * g.data()[j] + b.data()[j];
                }
            }
            (x.shape().to_vec(), out, normed, rstd)
        };
        let value = Tensor::checked("layer_norm", shape, data)?;
        let req = self.tape.requires(&[self.id, gamma.id, beta.id]);
        Ok(self.tape.push(
            value,
            Op::LayerNorm { x: self.id, gamma: gamma.id, beta: beta.id, normed, rstd },
            req,
        ))
    }
}

/// Concatenates along the last axis; all other extents must agree.
pub fn concat_last<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = *parts
        .first()
        .ok_or_else(|| TensorError::dim("concat_last", "no inputs"))?;
    let tape = first.tape;
    let (shape, data) = {
        let values: Vec<Ref<'_, Tensor>> = parts.iter().map(|p| p.value()).collect();
        let lead = &values[0].shape()[..values[0].rank().saturating_sub(1)];
        if values[0].rank() == 0 {
            return Err(TensorError::dim("concat_last", "scalar input"));
        }
        for v in &values[1..] {
            if v.rank() != values[0].rank() || &v.shape()[..v.rank() - 1] != lead {
                return Err(TensorError::dim(
                    "concat_last",
                    format!("shapes {:?} and {:?} disagree off the last axis", values[0].shape(), v.shape()),
                ));
            }
        }
        let widths: Vec<usize> = values.iter().map(|v| *v.shape().last().unwrap()).collect();
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (v, &w) in values.iter().zip(&widths) {
                data.extend_from_slice(&v.data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        (shape, data)
    };
    for p in parts {
        first.same_tape(p);
    }
    let value = Tensor::checked("concat_last", shape, data)?;
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    let req = tape.requires(&ids);
    Ok(tape.push(value, Op::ConcatLast(ids), req))
}
