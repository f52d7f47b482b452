//! Reverse-mode automatic differentiation over a dynamic, append-only graph.
//!
//! A [`Graph`] is built fresh for every document: leaves are registered with
//! [`Graph::param`] (trainable) or [`Graph::constant`], every operation
//! appends a node whose inputs already exist, and [`Graph::backward`] walks
//! the nodes in exact reverse insertion order. Leaf gradients accumulate
//! across backward calls until [`Graph::zero_grad`].
//!
//! There is no broadcasting. Every operation checks its shapes and rejects
//! mismatches with [`Error::Shape`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// `[m,k]·[k,n] → [m,n]`, `[m,k]·[k] → [m]`, `[k]·[k] → [1]`.
    MatMul,
    Add,
    /// Elementwise product of equal shapes.
    Mul,
    /// Joins 1-D tensors end to end.
    Concat,
    /// Half-open range `[start, end)` of a 1-D tensor.
    Slice { start: usize, end: usize },
    Sigmoid,
    Tanh,
    /// Softmax over the last axis; every row sums to one.
    SoftmaxLastDim,
    /// Multiplication by a constant.
    Scale(f64),
    /// Sum of all entries, shape `[1]`.
    Sum,
    /// Mean squared difference of two equal-shaped tensors, shape `[1]`.
    Mse,
    /// Product of any tensor with a shape-`[1]` tensor (second input).
    MulScalar,
    /// Straight-through estimator: forward value is the fixed one-hot
    /// `hard`, gradient passes unchanged to the single (soft) input.
    StraightThrough { hard: Vec<f64> },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::MatMul => "matmul",
            Op::Add => "add",
            Op::Mul => "elementwise_multiply",
            Op::Concat => "concat",
            Op::Slice { .. } => "slice",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::SoftmaxLastDim => "softmax_lastdim",
            Op::Scale(_) => "scale",
            Op::Sum => "sum",
            Op::Mse => "mse",
            Op::MulScalar => "mul_scalar",
            Op::StraightThrough { .. } => "straight_through",
        }
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf,
    Op(Op, Vec<NodeId>),
}

#[derive(Debug, Clone)]
struct Node {
    kind: NodeKind,
    value: Tensor,
    requires_grad: bool,
    // Only populated for leaves with requires_grad.
    grad: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        let grad = Some(vec![0.0; value.numel()]);
        self.push(Node {
            kind: NodeKind::Leaf,
            value,
            requires_grad: true,
            grad,
        })
    }

    /// Registers a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Node {
            kind: NodeKind::Leaf,
            value,
            requires_grad: false,
            grad: None,
        })
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Accumulated gradient of a trainable leaf; `None` for constants and
    /// interior nodes.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            if let Some(g) = node.grad.as_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    pub fn apply(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId> {
        let value = self.forward(&op, inputs)?;
        let requires_grad = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        Ok(self.push(Node {
            kind: NodeKind::Op(op, inputs.to_vec()),
            value,
            requires_grad,
            grad: None,
        }))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Add, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Op::Mul, &[a, b])
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.apply(Op::Concat, parts)
    }

    pub fn slice(&mut self, x: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.apply(Op::Slice { start, end }, &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Sigmoid, &[x])
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Tanh, &[x])
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::SoftmaxLastDim, &[x])
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        self.apply(Op::Scale(factor), &[x])
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Op::Sum, &[x])
    }

    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        self.apply(Op::Mse, &[pred, target])
    }

    pub fn mul_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        self.apply(Op::MulScalar, &[x, s])
    }

    pub fn straight_through(&mut self, hard: Vec<f64>, soft: NodeId) -> Result<NodeId> {
        self.apply(Op::StraightThrough { hard }, &[soft])
    }

    /// `W·x + b` for a matrix `W` and vectors `x`, `b`.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let wx = self.matmul(w, x)?;
        self.add(wx, b)
    }

    fn forward(&self, op: &Op, inputs: &[NodeId]) -> Result<Tensor> {
        let arity = match op {
            Op::Concat => None,
            Op::MatMul | Op::Add | Op::Mul | Op::Mse | Op::MulScalar => Some(2),
            _ => Some(1),
        };
        if let Some(n) = arity {
            if inputs.len() != n {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{} takes {n} inputs, got {}",
                    op.name(),
                    inputs.len()
                )));
            }
        }
        let v = |k: usize| &self.nodes[inputs[k].0].value;
        match op {
            Op::MatMul => matmul_forward(v(0), v(1)),
            Op::Add | Op::Mul | Op::Mse => {
                let (a, b) = (v(0), v(1));
                same_shape(op.name(), a, b)?;
                let pairs = a.values().iter().zip(b.values());
                match op {
                    Op::Add => Tensor::new(a.shape().to_vec(), pairs.map(|(x, y)| x + y).collect()),
                    Op::Mul => Tensor::new(a.shape().to_vec(), pairs.map(|(x, y)| x * y).collect()),
                    _ => {
                        let total: f64 = pairs.map(|(x, y)| (x - y) * (x - y)).sum();
                        Ok(Tensor::scalar(total / a.numel() as f64))
                    }
                }
            }
            Op::Concat => {
                if inputs.is_empty() {
                    return Err(Error::InvalidArgument("concat of zero tensors".into()));
                }
                let mut out = Vec::new();
                for &id in inputs {
                    let t = &self.nodes[id.0].value;
                    expect_rank1("concat", t)?;
                    out.extend_from_slice(t.values());
                }
                Tensor::vector(out)
            }
            Op::Slice { start, end } => {
                let x = v(0);
                expect_rank1("slice", x)?;
                let extent = x.numel();
                if start >= end || *end > extent {
                    return Err(Error::SliceRange {
                        start: *start,
                        end: *end,
                        extent,
                    });
                }
                Tensor::vector(x.values()[*start..*end].to_vec())
            }
            Op::Sigmoid => Ok(map(v(0), math::sigmoid)),
            Op::Tanh => Ok(map(v(0), math::tanh)),
            Op::Scale(factor) => Ok(map(v(0), |x| x * factor)),
            Op::SoftmaxLastDim => {
                let x = v(0);
                let cols = *x.shape().last().expect("tensor has rank >= 1");
                let mut out = Vec::with_capacity(x.numel());
                for row in x.values().chunks(cols) {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|&r| math::exp(r - max)).collect();
                    let z: f64 = exps.iter().sum();
                    out.extend(exps.into_iter().map(|e| e / z));
                }
                Tensor::new(x.shape().to_vec(), out)
            }
            Op::Sum => Ok(Tensor::scalar(v(0).values().iter().sum())),
            Op::MulScalar => {
                let (x, s) = (v(0), v(1));
                if s.shape() != [1] {
                    return Err(Error::Shape {
                        op: "mul_scalar",
                        expected: vec![1],
                        actual: s.shape().to_vec(),
                    });
                }
                let s = s.values()[0];
                Ok(map(x, |e| e * s))
            }
            Op::StraightThrough { hard } => {
                let soft = v(0);
                if hard.len() != soft.numel() {
                    return Err(Error::Shape {
                        op: "straight_through",
                        expected: soft.shape().to_vec(),
                        actual: vec![hard.len()],
                    });
                }
                Tensor::new(soft.shape().to_vec(), hard.clone())
            }
        }
    }

    /// Back-propagates `d loss / d leaf` into every trainable leaf,
    /// accumulating onto existing gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let loss_shape = self.nodes[loss.0].value.shape();
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(loss_shape.to_vec()));
        }
        let mut adjoint: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adjoint[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = adjoint[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let (op, inputs) = match &node.kind {
                NodeKind::Leaf => {
                    let grad = self.nodes[idx].grad.as_mut().expect("trainable leaf has grad");
                    for (g, u) in grad.iter_mut().zip(&upstream) {
                        *g += u;
                    }
                    continue;
                }
                NodeKind::Op(op, inputs) => (op, inputs),
            };
            let contributions = self.vjp(op, inputs, &node.value, &upstream);
            for (input, contribution) in inputs.iter().zip(contributions) {
                let Some(contribution) = contribution else {
                    continue;
                };
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut adjoint[input.0] {
                    Some(acc) => acc.iter_mut().zip(&contribution).for_each(|(a, c)| *a += c),
                    slot @ None => *slot = Some(contribution),
                }
            }
        }
        Ok(())
    }

    // Vector-Jacobian products, one entry per input.
    fn vjp(&self, op: &Op, inputs: &[NodeId], out: &Tensor, up: &[f64]) -> Vec<Option<Vec<f64>>> {
        let v = |k: usize| &self.nodes[inputs[k].0].value;
        let need = |k: usize| self.nodes[inputs[k].0].requires_grad;
        match op {
            Op::MatMul => {
                let (a, b) = (v(0), v(1));
                let (da, db) = matmul_backward(a, b, up, need(0), need(1));
                vec![da, db]
            }
            Op::Add => vec![Some(up.to_vec()), Some(up.to_vec())],
            Op::Mul => {
                let (a, b) = (v(0).values(), v(1).values());
                vec![
                    Some(up.iter().zip(b).map(|(u, y)| u * y).collect()),
                    Some(up.iter().zip(a).map(|(u, x)| u * x).collect()),
                ]
            }
            Op::Concat => {
                let mut offset = 0;
                inputs
                    .iter()
                    .map(|id| {
                        let n = self.nodes[id.0].value.numel();
                        let part = up[offset..offset + n].to_vec();
                        offset += n;
                        Some(part)
                    })
                    .collect()
            }
            Op::Slice { start, end } => {
                let mut g = vec![0.0; v(0).numel()];
                g[*start..*end].copy_from_slice(up);
                vec![Some(g)]
            }
            Op::Sigmoid => {
                let y = out.values();
                vec![Some(up.iter().zip(y).map(|(u, s)| u * s * (1.0 - s)).collect())]
            }
            Op::Tanh => {
                let y = out.values();
                vec![Some(up.iter().zip(y).map(|(u, t)| u * (1.0 - t * t)).collect())]
            }
            Op::Scale(factor) => vec![Some(up.iter().map(|u| u * factor).collect())],
            Op::SoftmaxLastDim => {
                let cols = *out.shape().last().expect("rank >= 1");
                let mut g = Vec::with_capacity(up.len());
                for (y, dy) in out.values().chunks(cols).zip(up.chunks(cols)) {
                    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
                    g.extend(y.iter().zip(dy).map(|(yi, di)| yi * (di - dot)));
                }
                vec![Some(g)]
            }
            Op::Sum => vec![Some(vec![up[0]; v(0).numel()])],
            Op::Mse => {
                let (a, b) = (v(0).values(), v(1).values());
                let k = 2.0 * up[0] / a.len() as f64;
                let da: Vec<f64> = a.iter().zip(b).map(|(x, y)| k * (x - y)).collect();
                let db = da.iter().map(|d| -d).collect();
                vec![Some(da), Some(db)]
            }
            Op::MulScalar => {
                let (x, s) = (v(0).values(), v(1).values()[0]);
                let dx = up.iter().map(|u| u * s).collect();
                let ds = up.iter().zip(x).map(|(u, e)| u * e).sum();
                vec![Some(dx), Some(vec![ds])]
            }
            Op::StraightThrough { .. } => vec![Some(up.to_vec())],
        }
    }
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(x.shape().to_vec(), x.values().iter().map(|&e| f(e)).collect())
        .expect("shape preserved")
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            expected: a.shape().to_vec(),
            actual: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn expect_rank1(op: &'static str, t: &Tensor) -> Result<()> {
    if t.shape().len() != 1 {
        return Err(Error::Shape {
            op,
            expected: vec![t.numel()],
            actual: t.shape().to_vec(),
        });
    }
    Ok(())
}

fn matmul_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mismatch = |expected: Vec<usize>| Error::Shape {
        op: "matmul",
        expected,
        actual: b.shape().to_vec(),
    };
    match (a.shape(), b.shape()) {
        (&[m, k], &[k2, n]) => {
            if k != k2 {
                return Err(mismatch(vec![k, n]));
            }
            let (av, bv) = (a.values(), b.values());
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                for p in 0..k {
                    let aip = av[i * k + p];
                    for j in 0..n {
                        out[i * n + j] += aip * bv[p * n + j];
                    }
                }
            }
            Tensor::matrix(m, n, out)
        }
        (&[m, k], &[k2]) => {
            if k != k2 {
                return Err(mismatch(vec![k]));
            }
            let (av, bv) = (a.values(), b.values());
            let out = (0..m)
                .map(|i| av[i * k..(i + 1) * k].iter().zip(bv).map(|(x, y)| x * y).sum())
                .collect();
            Tensor::vector(out)
        }
        (&[k], &[k2]) => {
            if k != k2 {
                return Err(mismatch(vec![k]));
            }
            Ok(Tensor::scalar(
                a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum(),
            ))
        }
        (sa, _) => Err(Error::Shape {
            op: "matmul",
            expected: sa.to_vec(),
            actual: b.shape().to_vec(),
        }),
    }
}

fn matmul_backward(
    a: &Tensor,
    b: &Tensor,
    up: &[f64],
    need_a: bool,
    need_b: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    let (av, bv) = (a.values(), b.values());
    match (a.shape(), b.shape()) {
        (&[m, k], &[_, n]) => {
            let da = need_a.then(|| {
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        da[i * k + p] = (0..n).map(|j| up[i * n + j] * bv[p * n + j]).sum();
                    }
                }
                da
            });
            let db = need_b.then(|| {
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let aip = av[i * k + p];
                        for j in 0..n {
                            db[p * n + j] += aip * up[i * n + j];
                        }
                    }
                }
                db
            });
            (da, db)
        }
        (&[m, k], &[_]) => {
            let da = need_a.then(|| {
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        da[i * k + p] = up[i] * bv[p];
                    }
                }
                da
            });
            let db = need_b.then(|| {
                let mut db = vec![0.0; k];
                for i in 0..m {
                    for p in 0..k {
                        db[p] += av[i * k + p] * up[i];
                    }
                }
                db
            });
            (da, db)
        }
        _ => (
            need_a.then(|| bv.iter().map(|y| up[0] * y).collect()),
            need_b.then(|| av.iter().map(|x| up[0] * x).collect()),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn vec1(g: &mut Graph, v: &[f64]) -> NodeId {
        g.param(Tensor::vector(v.to_vec()).unwrap())
    }

    #[test]
    fn matmul_by_hand() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = g.constant(Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap());
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).shape(), &[2, 1]);
        assert_eq!(g.value(c).values(), &[3.0, 7.0]);
    }

    #[test]
    fn sigmoid_and_softmax_at_zero() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[0.0]);
        let s = g.sigmoid(x).unwrap();
        assert_eq!(g.value(s).values(), &[0.5]);
        let y = vec1(&mut g, &[0.0, 0.0]);
        let p = g.softmax(y).unwrap();
        assert_eq!(g.value(p).values(), &[0.5, 0.5]);
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut g = Graph::new();
        let a = vec1(&mut g, &[1.0, 2.0]);
        let b = vec1(&mut g, &[1.0, 2.0, 3.0]);
        let err = g.add(a, b).unwrap_err();
        assert_eq!(
            err,
            Error::Shape {
                op: "add",
                expected: vec![2],
                actual: vec![3]
            }
        );
        assert!(err.to_string().contains("add"));
        assert!(matches!(g.matmul(a, b), Err(Error::Shape { op: "matmul", .. })));
        assert!(matches!(g.slice(a, 1, 3), Err(Error::SliceRange { .. })));
        assert!(matches!(g.slice(a, 1, 1), Err(Error::SliceRange { .. })));
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[0.0]);
        let s = g.sigmoid(x).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.25]);

        let mut g = Graph::new();
        let x = vec1(&mut g, &[3.0]);
        let sq = g.mul(x, x).unwrap();
        let l = g.sum(sq).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0]);

        let mut g = Graph::new();
        let x = vec1(&mut g, &[1.5, -2.0]);
        let t = g.constant(Tensor::vector(vec![1.5, -2.0]).unwrap());
        let l = g.mse(x, t).unwrap();
        g.backward(l).unwrap();
        assert!(g.grad(x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_accumulates_until_reset() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[3.0]);
        let sq = g.mul(x, x).unwrap();
        let l = g.sum(sq).unwrap();
        g.backward(l).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[12.0]);
        g.zero_grad();
        assert_eq!(g.grad(x).unwrap(), &[0.0]);
    }

    #[test]
    fn unreachable_leaf_gets_zero_grad() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[1.0, 2.0]);
        let unused = vec1(&mut g, &[5.0]);
        let l = g.sum(x).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(unused).unwrap(), &[0.0]);
        assert_eq!(g.grad(x).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[1.0, 2.0]);
        assert_eq!(g.backward(x), Err(Error::NonScalarLoss(vec![2])));
    }

    #[test]
    fn straight_through_forwards_hard_backwards_soft() {
        let mut g = Graph::new();
        let logits = vec1(&mut g, &[0.3, 0.1]);
        let soft = g.softmax(logits).unwrap();
        let st = g.straight_through(vec![1.0, 0.0], soft).unwrap();
        assert_eq!(g.value(st).values(), &[1.0, 0.0]);
        let first = g.slice(st, 0, 1).unwrap();
        g.backward(first).unwrap();
        let p = g.value(soft).values()[0];
        let grad = g.grad(logits).unwrap();
        assert!((grad[0] - p * (1.0 - p)).abs() < 1e-15);
        assert!((grad[1] + p * (1.0 - p)).abs() < 1e-15);
    }
}
