//! Bottom-up Gumbel Tree-LSTM encoder.
//!
//! Each EDU encoding is mapped to a leaf state. While more than one node is
//! left on the frontier, every adjacent pair is composed into a candidate
//! parent, the candidates are scored against a learned query vector, and a
//! straight-through Gumbel-Softmax picks one pair to merge. The last state
//! standing is the document state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;
use crate::trees::{from_merge_trace, BinaryTree, MergeTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `[2H, d]`: first `H` rows feed `h`, last `H` rows feed `c`.
    pub w_leaf: Tensor,
    pub b_leaf: Tensor,
    /// `[5H, 2H]` gates `i, f_l, f_r, o, g` from `[h_l; h_r]`.
    pub w_comp: Tensor,
    pub b_comp: Tensor,
    /// `[H]` structure query.
    pub query: Tensor,
}

impl EncoderParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            w_leaf: Tensor::zeros(vec![2 * hidden, input_dim])?,
            b_leaf: Tensor::zeros(vec![2 * hidden])?,
            w_comp: Tensor::zeros(vec![5 * hidden, 2 * hidden])?,
            b_comp: Tensor::zeros(vec![5 * hidden])?,
            query: Tensor::zeros(vec![hidden])?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.query.numel()
    }

    pub fn input_dim(&self) -> usize {
        self.w_leaf.shape()[1]
    }

    /// Registers the weights in `graph`. Tensors for which `trainable`
    /// returns false become constants.
    pub fn bind(&self, graph: &mut Graph, trainable: EncoderTrainable) -> EncoderNodes {
        let mut reg = |t: &Tensor, on: bool| {
            if on {
                graph.param(t.clone())
            } else {
                graph.constant(t.clone())
            }
        };
        EncoderNodes {
            w_leaf: reg(&self.w_leaf, trainable.weights),
            b_leaf: reg(&self.b_leaf, trainable.weights),
            w_comp: reg(&self.w_comp, trainable.weights),
            b_comp: reg(&self.b_comp, trainable.weights),
            query: reg(&self.query, trainable.query),
            input_dim: self.input_dim(),
            hidden: self.hidden(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderTrainable {
    pub weights: bool,
    pub query: bool,
}

/// Encoder weights registered in a graph.
#[derive(Debug, Clone, Copy)]
pub struct EncoderNodes {
    pub w_leaf: NodeId,
    pub b_leaf: NodeId,
    pub w_comp: NodeId,
    pub b_comp: NodeId,
    pub query: NodeId,
    pub(crate) input_dim: usize,
    pub(crate) hidden: usize,
}

impl EncoderNodes {
    pub fn hidden(&self) -> usize {
        self.hidden
    }
}

/// Hidden and memory vectors of one tree node, as graph handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeState {
    pub h: NodeId,
    pub c: NodeId,
}

fn check_len(graph: &Graph, op: &'static str, id: NodeId, len: usize) -> Result<()> {
    let shape = graph.shape(id);
    if shape != [len] {
        return Err(Error::Shape {
            op,
            expected: vec![len],
            actual: shape.to_vec(),
        });
    }
    Ok(())
}

/// `u = W_leaf e + b_leaf`, `h = tanh(u[..H])`, `c = u[H..]`.
pub fn leaf_transform(graph: &mut Graph, embedding: NodeId, p: &EncoderNodes) -> Result<NodeState> {
    check_len(graph, "leaf_transform", embedding, p.input_dim)?;
    let hd = p.hidden;
    let u = graph.affine(p.w_leaf, embedding, p.b_leaf)?;
    let pre_h = graph.slice(u, 0, hd)?;
    let h = graph.tanh(pre_h)?;
    let c = graph.slice(u, hd, 2 * hd)?;
    Ok(NodeState { h, c })
}

/// Binary Tree-LSTM cell with one forget gate per child.
pub fn compose(graph: &mut Graph, left: NodeState, right: NodeState, p: &EncoderNodes) -> Result<NodeState> {
    let hd = p.hidden;
    for id in [left.h, left.c, right.h, right.c] {
        check_len(graph, "compose", id, hd)?;
    }
    let x = graph.concat(&[left.h, right.h])?;
    let z = graph.affine(p.w_comp, x, p.b_comp)?;
    let mut gate = |k: usize| graph.slice(z, k * hd, (k + 1) * hd);
    let (zi, zfl, zfr, zo, zg) = (gate(0)?, gate(1)?, gate(2)?, gate(3)?, gate(4)?);
    let i = graph.sigmoid(zi)?;
    let fl = graph.sigmoid(zfl)?;
    let fr = graph.sigmoid(zfr)?;
    let o = graph.sigmoid(zo)?;
    let g = graph.tanh(zg)?;
    let keep_l = graph.mul(fl, left.c)?;
    let keep_r = graph.mul(fr, right.c)?;
    let write = graph.mul(i, g)?;
    let c = graph.add(keep_l, keep_r)?;
    let c = graph.add(c, write)?;
    let tc = graph.tanh(c)?;
    let h = graph.mul(o, tc)?;
    Ok(NodeState { h, c })
}

/// Composes every adjacent pair of `frontier` and scores each candidate
/// parent by `q · h`. Returns the candidates and a `[k-1]` logit vector.
pub fn score_pairs(graph: &mut Graph, frontier: &[NodeState], p: &EncoderNodes) -> Result<(Vec<NodeState>, NodeId)> {
    if frontier.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "scoring needs at least 2 frontier nodes, got {}",
            frontier.len()
        )));
    }
    let mut candidates = Vec::with_capacity(frontier.len() - 1);
    let mut scores = Vec::with_capacity(frontier.len() - 1);
    for pair in frontier.windows(2) {
        let cand = compose(graph, pair[0], pair[1], p)?;
        scores.push(graph.matmul(p.query, cand.h)?);
        candidates.push(cand);
    }
    let logits = graph.concat(&scores)?;
    Ok((candidates, logits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    /// Gumbel-perturbed logits.
    Sample,
    /// Plain logits.
    Argmax,
}

/// Output of [`st_gumbel_select`].
#[derive(Debug, Clone)]
pub struct Selection {
    pub index: usize,
    pub hard: Vec<f64>,
    /// `softmax(perturbed / temperature)`.
    pub soft: NodeId,
    /// Straight-through gate: forward value `hard`, gradient of `soft`.
    pub gate: NodeId,
}

/// Standard Gumbel(0, 1) draw, `-ln(-ln u)` with `u` uniform on (0, 1).
pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return -math::ln(-math::ln(u));
        }
    }
}

/// Lowest index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn st_gumbel_select<R: Rng + ?Sized>(
    graph: &mut Graph,
    logits: NodeId,
    temperature: f64,
    mode: SelectMode,
    rng: &mut R,
) -> Result<Selection> {
    let noise = match mode {
        SelectMode::Sample => Some((0..graph.value(logits).numel()).map(|_| gumbel(rng)).collect::<Vec<_>>()),
        SelectMode::Argmax => None,
    };
    st_gumbel_select_with_noise(graph, logits, temperature, noise.as_deref())
}

/// [`st_gumbel_select`] with explicit perturbation; `None` means argmax mode.
pub fn st_gumbel_select_with_noise(
    graph: &mut Graph,
    logits: NodeId,
    temperature: f64,
    noise: Option<&[f64]>,
) -> Result<Selection> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let m = graph.value(logits).numel();
    if graph.shape(logits) != [m] {
        return Err(Error::Shape {
            op: "st_gumbel_select",
            expected: vec![m],
            actual: graph.shape(logits).to_vec(),
        });
    }
    let perturbed = match noise {
        Some(noise) => {
            let noise = graph.constant(Tensor::vector(noise.to_vec())?);
            graph.add(logits, noise)?
        }
        None => logits,
    };
    let scaled = graph.scale(perturbed, 1.0 / temperature)?;
    let index = argmax(graph.value(scaled).values());
    let soft = graph.softmax(scaled)?;
    let mut hard = vec![0.0; m];
    hard[index] = 1.0;
    let gate = graph.straight_through(hard.clone(), soft)?;
    Ok(Selection { index, hard, soft, gate })
}

/// How merges are chosen during encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    Sample { temperature: f64 },
    Argmax { temperature: f64 },
    /// Replays a given trace with constant one-hot selections. No gradient
    /// reaches the query; used for gradient checks and forced structures.
    Fixed(MergeTrace),
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub root: NodeState,
    pub tree: BinaryTree,
    pub trace: MergeTrace,
    pub leaves: Vec<NodeState>,
}

pub fn encode_document<R: Rng + ?Sized>(
    graph: &mut Graph,
    embeddings: &[NodeId],
    p: &EncoderNodes,
    selector: &Selector,
    rng: &mut R,
) -> Result<Encoded> {
    let n = embeddings.len();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot encode an empty document".into()));
    }
    if let Selector::Fixed(trace) = selector {
        trace.validate(n)?;
    }
    let leaves = embeddings
        .iter()
        .map(|&e| leaf_transform(graph, e, p))
        .collect::<Result<Vec<_>>>()?;
    let mut frontier = leaves.clone();
    let mut steps = Vec::with_capacity(n.saturating_sub(1));

    while frontier.len() > 1 {
        let (candidates, logits) = score_pairs(graph, &frontier, p)?;
        let (index, gate) = match selector {
            Selector::Fixed(trace) => (trace.steps()[steps.len()], None),
            Selector::Sample { temperature } | Selector::Argmax { temperature } => {
                let mode = if matches!(selector, Selector::Sample { .. }) {
                    SelectMode::Sample
                } else {
                    SelectMode::Argmax
                };
                let sel = st_gumbel_select(graph, logits, *temperature, mode, rng)?;
                (sel.index, Some(sel.gate))
            }
        };
        steps.push(index);
        frontier = match gate {
            None => {
                let mut next = frontier;
                next.remove(index + 1);
                next[index] = candidates[index];
                next
            }
            Some(gate) => gated_frontier(graph, &frontier, &candidates, gate)?,
        };
    }

    let trace = MergeTrace(steps);
    let tree = from_merge_trace(n, &trace)?;
    Ok(Encoded {
        root: frontier[0],
        tree,
        trace,
        leaves,
    })
}

// new_i = s_i cand_i + (sum_{j>i} s_j) old_i + (sum_{j<i} s_j) old_{i+1}
fn gated_frontier(
    graph: &mut Graph,
    frontier: &[NodeState],
    candidates: &[NodeState],
    gate: NodeId,
) -> Result<Vec<NodeState>> {
    let m = candidates.len();
    let mut next = Vec::with_capacity(m);
    for i in 0..m {
        let pick = graph.slice(gate, i, i + 1)?;
        let keep = if i + 1 < m {
            let tail = graph.slice(gate, i + 1, m)?;
            Some(graph.sum(tail)?)
        } else {
            None
        };
        let shift = if i > 0 {
            let head = graph.slice(gate, 0, i)?;
            Some(graph.sum(head)?)
        } else {
            None
        };
        let mut mix = |cand: NodeId, old: NodeId, old_next: NodeId| -> Result<NodeId> {
            let mut acc = graph.mul_scalar(cand, pick)?;
            if let Some(k) = keep {
                let t = graph.mul_scalar(old, k)?;
                acc = graph.add(acc, t)?;
            }
            if let Some(s) = shift {
                let t = graph.mul_scalar(old_next, s)?;
                acc = graph.add(acc, t)?;
            }
            Ok(acc)
        };
        let h = mix(candidates[i].h, frontier[i].h, frontier[i + 1].h)?;
        let c = mix(candidates[i].c, frontier[i].c, frontier[i + 1].c)?;
        next.push(NodeState { h, c });
    }
    Ok(next)
}
