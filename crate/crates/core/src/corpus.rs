//! Word embeddings, EDU-segmented documents and averaged EDU encodings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Word → vector table of a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
    warnings: Vec<String>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            entries: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts `word` unless it is already present; the first occurrence wins
    /// and a warning is recorded for the duplicate. Returns whether the vector
    /// was stored.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "vector for {word:?} has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.entries.contains_key(word) {
            self.warnings.push(format!("duplicate word {word:?} ignored"));
            return Ok(false);
        }
        self.entries.insert(word.into(), vector);
        Ok(true)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Mean of the in-vocabulary token vectors. Out-of-vocabulary tokens are
    /// skipped; an EDU with no known token maps to the zero vector and bumps
    /// `stats.all_oov_edus`.
    pub fn edu_embedding<S: AsRef<str>>(&self, tokens: &[S], stats: &mut OovStats) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("EDU has no tokens".into()));
        }
        let mut sum = vec![0.0; self.dim];
        let mut known = 0usize;
        for token in tokens {
            stats.tokens += 1;
            match self.get(token.as_ref()) {
                Some(v) => {
                    known += 1;
                    sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                }
                None => stats.oov_tokens += 1,
            }
        }
        stats.edus += 1;
        if known == 0 {
            stats.all_oov_edus += 1;
            return Ok(sum);
        }
        let n = known as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        Ok(sum)
    }

    /// EDU encodings of every EDU in `doc`, in order.
    pub fn document_embeddings(&self, doc: &EduDocument, stats: &mut OovStats) -> Result<Vec<Vec<f64>>> {
        doc.edus()
            .iter()
            .map(|edu| self.edu_embedding(edu, stats))
            .collect()
    }
}

/// Out-of-vocabulary counters accumulated by [`EmbeddingTable::edu_embedding`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OovStats {
    pub tokens: usize,
    pub oov_tokens: usize,
    pub edus: usize,
    pub all_oov_edus: usize,
}

/// An ordered sequence of pre-tokenized EDUs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EduDocument {
    id: String,
    edus: Vec<Vec<String>>,
}

impl EduDocument {
    pub fn new(id: impl Into<String>, edus: Vec<Vec<String>>) -> Result<Self> {
        let id = id.into();
        if edus.is_empty() {
            return Err(Error::Document {
                doc: id,
                message: "document has no EDUs".into(),
            });
        }
        if let Some(k) = edus.iter().position(Vec::is_empty) {
            return Err(Error::Document {
                doc: id,
                message: format!("EDU {k} has no tokens"),
            });
        }
        Ok(Self { id, edus })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn edus(&self) -> &[Vec<String>] {
        &self.edus
    }

    pub fn len(&self) -> usize {
        self.edus.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}
