//! Text file formats: embeddings, corpora, tree files and loss tables.
//!
//! * Embeddings: one `word v1 ... vd` per line (GloVe text convention); the
//!   first line fixes `d`.
//! * Corpus: one JSON record per line, `{"id": "...", "edus": [["tok", ...], ...]}`.
//! * Trees: one `doc_id<TAB>bracketed_tree` per line.
//! * Loss table: `epoch,phase,mean_loss` header, then one row per epoch.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tae_core::trainer::EpochRecord;
use tae_core::{BinaryTree, EduDocument, EmbeddingTable, Phase};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::io(path, source))
}

fn parse_error(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: source.to_string(),
        line,
        message: message.into(),
    }
}

fn lines<R: BufRead>(reader: R, source: &str) -> impl Iterator<Item = Result<(usize, String)>> {
    let source = source.to_string();
    reader.lines().enumerate().map(move |(k, line)| {
        line.map(|l| (k + 1, l))
            .map_err(|e| parse_error(&source, k + 1, e.to_string()))
    })
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    parse_embeddings(open(path)?, &path.display().to_string())
}

/// Parses GloVe-style text. Duplicate words keep their first vector and add
/// a warning to the table.
pub fn parse_embeddings<R: BufRead>(reader: R, source: &str) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for item in lines(reader, source) {
        let (line_no, line) = item?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line");
        let vector = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(source, line_no, format!("invalid component {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let table = match &mut table {
            Some(t) => t,
            None => {
                let t = EmbeddingTable::new(vector.len())
                    .map_err(|_| parse_error(source, line_no, "first line has no vector components"))?;
                table.insert(t)
            }
        };
        if vector.len() != table.dim() {
            return Err(parse_error(
                source,
                line_no,
                format!("expected {} components, found {}", table.dim(), vector.len()),
            ));
        }
        table.insert(word, vector)?;
    }
    table.ok_or_else(|| parse_error(source, 0, "embedding file is empty"))
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    edus: Vec<Vec<String>>,
}

pub fn load_corpus(path: &Path) -> Result<Vec<EduDocument>> {
    parse_corpus(open(path)?, &path.display().to_string())
}

/// Parses line-delimited JSON documents. Blank lines are skipped; an empty
/// input is an empty corpus.
pub fn parse_corpus<R: BufRead>(reader: R, source: &str) -> Result<Vec<EduDocument>> {
    let mut docs = Vec::new();
    for item in lines(reader, source) {
        let (line_no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| parse_error(source, line_no, e.to_string()))?;
        let doc = EduDocument::new(record.id, record.edus).map_err(|e| parse_error(source, line_no, e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus<W: Write>(mut out: W, docs: &[EduDocument]) -> Result<()> {
    for doc in docs {
        let record = CorpusRecord {
            id: doc.id().to_string(),
            edus: doc.edus().to_vec(),
        };
        let line = serde_json::to_string(&record).expect("corpus records serialize");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_embeddings<W: Write>(mut out: W, table: &EmbeddingTable) -> Result<()> {
    for (word, vector) in table.iter() {
        write!(out, "{word}")?;
        for v in vector {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn load_trees(path: &Path) -> Result<Vec<(String, BinaryTree)>> {
    parse_trees(open(path)?, &path.display().to_string())
}

/// Parses `doc_id<TAB>bracketed_tree` lines; duplicate ids are rejected.
pub fn parse_trees<R: BufRead>(reader: R, source: &str) -> Result<Vec<(String, BinaryTree)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in lines(reader, source) {
        let (line_no, line) = item?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (id, bracketed) = line
            .split_once('\t')
            .ok_or_else(|| parse_error(source, line_no, "expected doc_id<TAB>tree"))?;
        if id.is_empty() {
            return Err(parse_error(source, line_no, "empty doc_id"));
        }
        let tree = BinaryTree::parse_bracketed(bracketed).map_err(|e| parse_error(source, line_no, e.to_string()))?;
        if !seen.insert(id.to_string()) {
            return Err(parse_error(source, line_no, format!("duplicate doc_id {id:?}")));
        }
        out.push((id.to_string(), tree));
    }
    Ok(out)
}

pub fn write_trees<W: Write>(mut out: W, trees: &[(String, BinaryTree)]) -> Result<()> {
    for (id, tree) in trees {
        writeln!(out, "{id}\t{}", tree.to_bracketed())?;
    }
    Ok(())
}

pub const LOSS_HEADER: &str = "epoch,phase,mean_loss";

/// Loss history as CSV with 12-digit fixed decimals.
pub fn emit_loss_table(history: &[EpochRecord]) -> String {
    let mut out = String::from(LOSS_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!("{},{},{:.12}\n", r.epoch, r.phase.as_char(), r.mean_loss));
    }
    out
}

pub fn parse_loss_table<R: Read>(reader: R) -> Result<Vec<(usize, Phase, f64)>> {
    let mut rows = Vec::new();
    for item in lines(BufReader::new(reader), "loss table") {
        let (line_no, line) = item?;
        if line_no == 1 {
            if line != LOSS_HEADER {
                return Err(parse_error("loss table", 1, "missing header"));
            }
            continue;
        }
        let bad = || parse_error("loss table", line_no, format!("malformed row {line:?}"));
        let mut cols = line.split(',');
        let epoch = cols.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        let phase = cols
            .next()
            .and_then(|c| c.chars().next().filter(|_| c.len() == 1))
            .and_then(Phase::from_char)
            .ok_or_else(bad)?;
        let loss = cols.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        if cols.next().is_some() {
            return Err(bad());
        }
        rows.push((epoch, phase, loss));
    }
    Ok(rows)
}
