//! Top-down inverse Tree-LSTM decoder.
//!
//! The document state is split recursively along the encoder's tree: each
//! internal node hands its state to a left cell and a right cell with
//! separate weights, and every leaf state is projected back to embedding
//! space.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Graph, NodeId};
use crate::encoder::NodeState;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::trees::BinaryTree;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// `[4H, H]` gates `f, i, o, g` of the left split cell.
    pub w_left: Tensor,
    pub b_left: Tensor,
    pub w_right: Tensor,
    pub b_right: Tensor,
    /// `[d, H]` leaf projection.
    pub w_out: Tensor,
    pub b_out: Tensor,
}

impl DecoderParams {
    pub fn zeros(output_dim: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            w_left: Tensor::zeros(vec![4 * hidden, hidden])?,
            b_left: Tensor::zeros(vec![4 * hidden])?,
            w_right: Tensor::zeros(vec![4 * hidden, hidden])?,
            b_right: Tensor::zeros(vec![4 * hidden])?,
            w_out: Tensor::zeros(vec![output_dim, hidden])?,
            b_out: Tensor::zeros(vec![output_dim])?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.w_out.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.w_out.shape()[0]
    }

    pub fn bind(&self, graph: &mut Graph, trainable: bool) -> DecoderNodes {
        let mut reg = |t: &Tensor| {
            if trainable {
                graph.param(t.clone())
            } else {
                graph.constant(t.clone())
            }
        };
        DecoderNodes {
            w_left: reg(&self.w_left),
            b_left: reg(&self.b_left),
            w_right: reg(&self.w_right),
            b_right: reg(&self.b_right),
            w_out: reg(&self.w_out),
            b_out: reg(&self.b_out),
            hidden: self.hidden(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecoderNodes {
    pub w_left: NodeId,
    pub b_left: NodeId,
    pub w_right: NodeId,
    pub b_right: NodeId,
    pub w_out: NodeId,
    pub b_out: NodeId,
    pub(crate) hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `[f; i; o; g] = W h + b`, `c' = σ(f) ⊙ c + σ(i) ⊙ tanh(g)`, `h' = σ(o) ⊙ tanh(c')`.
pub fn split(graph: &mut Graph, parent: NodeState, side: Side, p: &DecoderNodes) -> Result<NodeState> {
    let hd = p.hidden;
    for id in [parent.h, parent.c] {
        if graph.shape(id) != [hd] {
            return Err(Error::Shape {
                op: "split",
                expected: vec![hd],
                actual: graph.shape(id).to_vec(),
            });
        }
    }
    let (w, b) = match side {
        Side::Left => (p.w_left, p.b_left),
        Side::Right => (p.w_right, p.b_right),
    };
    let z = graph.affine(w, parent.h, b)?;
    let mut gate = |k: usize| graph.slice(z, k * hd, (k + 1) * hd);
    let (zf, zi, zo, zg) = (gate(0)?, gate(1)?, gate(2)?, gate(3)?);
    let f = graph.sigmoid(zf)?;
    let i = graph.sigmoid(zi)?;
    let o = graph.sigmoid(zo)?;
    let g = graph.tanh(zg)?;
    let keep = graph.mul(f, parent.c)?;
    let write = graph.mul(i, g)?;
    let c = graph.add(keep, write)?;
    let tc = graph.tanh(c)?;
    let h = graph.mul(o, tc)?;
    Ok(NodeState { h, c })
}

#[derive(Debug, Clone)]
pub struct Decoded {
    /// One `[d]` reconstruction per leaf, in leaf-index order.
    pub reconstructions: Vec<NodeId>,
    /// The tree as walked by the decoder, rebuilt node by node.
    pub traversal: BinaryTree,
}

pub fn decode_document(graph: &mut Graph, root: NodeState, tree: &BinaryTree, p: &DecoderNodes) -> Result<Decoded> {
    let mut reconstructions = Vec::with_capacity(tree.leaf_count());
    let traversal = decode_node(graph, root, tree, p, &mut reconstructions)?;
    Ok(Decoded {
        reconstructions,
        traversal,
    })
}

fn decode_node(
    graph: &mut Graph,
    state: NodeState,
    node: &BinaryTree,
    p: &DecoderNodes,
    out: &mut Vec<NodeId>,
) -> Result<BinaryTree> {
    match node {
        BinaryTree::Leaf(i) => {
            out.push(graph.affine(p.w_out, state.h, p.b_out)?);
            Ok(BinaryTree::Leaf(*i))
        }
        BinaryTree::Internal(l, r) => {
            let ls = split(graph, state, Side::Left, p)?;
            let rs = split(graph, state, Side::Right, p)?;
            let left = decode_node(graph, ls, l, p, out)?;
            let right = decode_node(graph, rs, r, p, out)?;
            Ok(BinaryTree::join(left, right))
        }
    }
}

/// Mean over all `n·d` coordinates of the squared reconstruction error.
pub fn reconstruction_loss(graph: &mut Graph, preds: &[NodeId], targets: &[NodeId]) -> Result<NodeId> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::Shape {
            op: "reconstruction_loss",
            expected: vec![targets.len()],
            actual: vec![preds.len()],
        });
    }
    for (&p, &t) in preds.iter().zip(targets) {
        if graph.shape(p) != graph.shape(t) {
            return Err(Error::Shape {
                op: "reconstruction_loss",
                expected: graph.shape(t).to_vec(),
                actual: graph.shape(p).to_vec(),
            });
        }
    }
    let pred = graph.concat(preds)?;
    let target = graph.concat(targets)?;
    graph.mse(pred, target)
}
