//! Tree auto-encoder: unsupervised binary tree induction over sequences of
//! elementary discourse units (EDUs).
//!
//! Leaves are encoded bottom-up by a Tree-LSTM whose merge order is picked by
//! a straight-through Gumbel-Softmax selector. The root state is decoded
//! top-down by an inverse Tree-LSTM that follows the same tree, and the model
//! is trained to reconstruct the leaf encodings under mean-squared error.
//!
//! The crate is `no_std` (with `alloc`). File formats, checkpoints and the
//! command-line front end live in the companion `tae` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod autodiff;
pub mod corpus;
pub mod decoder;
pub mod encoder;
mod error;
pub mod gradcheck;
mod math;
pub mod params;
pub mod tensor;
pub mod trainer;
pub mod trees;

pub use crate::autodiff::{Graph, NodeId};
pub use crate::corpus::{EduDocument, EmbeddingTable, OovStats};
pub use crate::decoder::{DecoderParams, Decoded};
pub use crate::encoder::{EncoderParams, Encoded, NodeState, Selector};
pub use crate::error::{Error, Result};
pub use crate::params::{ModelParams, ParamGroup};
pub use crate::tensor::Tensor;
pub use crate::trainer::{EpochRecord, Phase, TrainConfig, Trainer};
pub use crate::trees::{BaselineKind, BinaryTree, MergeTrace, SpanScore};
