//! File formats, checkpoints and the `tae` command-line tool for the tree
//! auto-encoder in [`tae_core`].

pub mod checkpoint;
pub mod cli;
mod error;
pub mod io;
pub mod manifest;
pub mod report;
pub mod toy;

pub use crate::error::{Error, Result};
