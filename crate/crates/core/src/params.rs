//! Full model parameters and their structure/weights partition.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, NodeId};
use crate::decoder::{decode_document, DecoderNodes, DecoderParams};
use crate::encoder::{encode_document, EncoderNodes, EncoderParams, EncoderTrainable, Selector};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::trees::{BinaryTree, MergeTrace};

/// Which optimisation phase owns a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    /// The selector query.
    Structure,
    /// Everything that produces or decodes hidden states.
    Weights,
}

pub const PARAM_NAMES: [&str; 11] = [
    "encoder.w_leaf",
    "encoder.b_leaf",
    "encoder.w_comp",
    "encoder.b_comp",
    "encoder.query",
    "decoder.w_left",
    "decoder.b_left",
    "decoder.w_right",
    "decoder.b_right",
    "decoder.w_out",
    "decoder.b_out",
];

pub fn group_of(name: &str) -> ParamGroup {
    if name == "encoder.query" {
        ParamGroup::Structure
    } else {
        ParamGroup::Weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

impl ModelParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        Ok(Self {
            encoder: EncoderParams::zeros(input_dim, hidden)?,
            decoder: DecoderParams::zeros(input_dim, hidden)?,
        })
    }

    /// Every entry drawn from uniform(-0.1, 0.1), tensors filled in
    /// [`PARAM_NAMES`] order.
    pub fn init_uniform<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(input_dim, hidden)?;
        for (_, t) in params.tensors_mut() {
            t.values_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
        }
        Ok(params)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden()
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor); 11] {
        let (e, d) = (&self.encoder, &self.decoder);
        let t = [
            &e.w_leaf, &e.b_leaf, &e.w_comp, &e.b_comp, &e.query, &d.w_left, &d.b_left, &d.w_right,
            &d.b_right, &d.w_out, &d.b_out,
        ];
        core::array::from_fn(|k| (PARAM_NAMES[k], t[k]))
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 11] {
        let (e, d) = (&mut self.encoder, &mut self.decoder);
        let t = [
            &mut e.w_leaf,
            &mut e.b_leaf,
            &mut e.w_comp,
            &mut e.b_comp,
            &mut e.query,
            &mut d.w_left,
            &mut d.b_left,
            &mut d.w_right,
            &mut d.b_right,
            &mut d.w_out,
            &mut d.b_out,
        ];
        let mut names = PARAM_NAMES.iter();
        t.map(|t| (*names.next().expect("11 names"), t))
    }

    /// Builds parameters from named tensors, checking every shape against
    /// the given dimensions.
    pub fn from_named(input_dim: usize, hidden: usize, named: Vec<(&str, Tensor)>) -> Result<Self> {
        let mut params = Self::zeros(input_dim, hidden)?;
        if named.len() != PARAM_NAMES.len() {
            return Err(Error::Config(format!(
                "expected {} tensors, got {}",
                PARAM_NAMES.len(),
                named.len()
            )));
        }
        for (slot, (name, tensor)) in params.tensors_mut().into_iter().zip(named) {
            if slot.0 != name {
                return Err(Error::Config(format!("expected tensor {}, got {name}", slot.0)));
            }
            if slot.1.shape() != tensor.shape() {
                return Err(Error::Shape {
                    op: slot.0,
                    expected: slot.1.shape().to_vec(),
                    actual: tensor.shape().to_vec(),
                });
            }
            *slot.1 = tensor;
        }
        Ok(params)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    pub fn bit_eq(&self, other: &ModelParams) -> bool {
        self.tensors()
            .iter()
            .zip(other.tensors().iter())
            .all(|((_, a), (_, b))| a.bit_eq(b))
    }

    /// Registers all tensors in `graph`; only the `active` group (all groups
    /// when `None`) becomes trainable.
    pub fn bind(&self, graph: &mut Graph, active: Option<ParamGroup>) -> BoundModel {
        let on = |g: ParamGroup| active.is_none_or(|a| a == g);
        let encoder = self.encoder.bind(
            graph,
            EncoderTrainable {
                weights: on(ParamGroup::Weights),
                query: on(ParamGroup::Structure),
            },
        );
        let decoder = self.decoder.bind(graph, on(ParamGroup::Weights));
        BoundModel { encoder, decoder }
    }

    /// Argmax-mode tree for one document's EDU encodings.
    pub fn induce(&self, embeddings: &[Vec<f64>]) -> Result<(BinaryTree, MergeTrace)> {
        let mut graph = Graph::new();
        let bound = self.bind(&mut graph, Some(ParamGroup::Structure));
        let inputs = embeddings
            .iter()
            .map(|e| Ok(graph.constant(Tensor::vector(e.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        // Argmax draws no noise; the generator is never touched.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = encode_document(&mut graph, &inputs, &bound.encoder, &Selector::Argmax { temperature: 1.0 }, &mut rng)?;
        Ok((enc.tree, enc.trace))
    }

    /// Reconstructions of one document along a given tree, in leaf order.
    pub fn reconstruct(&self, embeddings: &[Vec<f64>], trace: &MergeTrace) -> Result<Vec<Vec<f64>>> {
        let mut graph = Graph::new();
        let bound = self.bind(&mut graph, Some(ParamGroup::Structure));
        let inputs = embeddings
            .iter()
            .map(|e| Ok(graph.constant(Tensor::vector(e.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = encode_document(&mut graph, &inputs, &bound.encoder, &Selector::Fixed(trace.clone()), &mut rng)?;
        let dec = decode_document(&mut graph, enc.root, &enc.tree, &bound.decoder)?;
        Ok(dec
            .reconstructions
            .iter()
            .map(|&r| graph.value(r).values().to_vec())
            .collect())
    }
}

/// Model tensors registered in one graph.
#[derive(Debug, Clone, Copy)]
pub struct BoundModel {
    pub encoder: EncoderNodes,
    pub decoder: DecoderNodes,
}

impl BoundModel {
    /// Reassembles a model from nodes already in `graph`, given in
    /// [`PARAM_NAMES`] order. Dimensions are read from `encoder.w_leaf` and
    /// every shape is checked against them.
    pub fn from_ids(graph: &Graph, ids: [NodeId; 11]) -> Result<Self> {
        let w_leaf = graph.shape(ids[0]);
        if w_leaf.len() != 2 || w_leaf[0] == 0 || !w_leaf[0].is_multiple_of(2) {
            return Err(Error::Config(format!("encoder.w_leaf must be [2H, d], got {w_leaf:?}")));
        }
        let (hidden, input_dim) = (w_leaf[0] / 2, w_leaf[1]);
        let expected = ModelParams::zeros(input_dim, hidden)?;
        for ((name, t), &id) in expected.tensors().iter().zip(&ids) {
            if graph.shape(id) != t.shape() {
                return Err(Error::Shape {
                    op: name,
                    expected: t.shape().to_vec(),
                    actual: graph.shape(id).to_vec(),
                });
            }
        }
        let [w_leaf, b_leaf, w_comp, b_comp, query, w_left, b_left, w_right, b_right, w_out, b_out] = ids;
        Ok(Self {
            encoder: EncoderNodes {
                w_leaf,
                b_leaf,
                w_comp,
                b_comp,
                query,
                input_dim,
                hidden,
            },
            decoder: DecoderNodes {
                w_left,
                b_left,
                w_right,
                b_right,
                w_out,
                b_out,
                hidden,
            },
        })
    }

    pub fn ids(&self) -> [NodeId; 11] {
        let (e, d) = (&self.encoder, &self.decoder);
        [
            e.w_leaf, e.b_leaf, e.w_comp, e.b_comp, e.query, d.w_left, d.b_left, d.w_right, d.b_right,
            d.w_out, d.b_out,
        ]
    }
}
