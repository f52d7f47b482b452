//! Evaluation and tree-statistics reports.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tae_core::trees::{baseline_tree_with_rng, unlabeled_span_f1};
use tae_core::{BaselineKind, BinaryTree, SpanScore};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DocScore {
    pub id: String,
    pub leaves: usize,
    pub score: SpanScore,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub documents: Vec<DocScore>,
    /// Span counts pooled over all documents.
    pub micro: SpanScore,
}

/// Scores `pred` against `gold`, joined on doc id, in gold order. Any id
/// present on only one side is an error listing every such id.
pub fn evaluate(pred: &[(String, BinaryTree)], gold: &[(String, BinaryTree)]) -> Result<EvalReport> {
    let pred_by_id: HashMap<&str, &BinaryTree> = pred.iter().map(|(id, t)| (id.as_str(), t)).collect();
    let gold_ids: BTreeSet<&str> = gold.iter().map(|(id, _)| id.as_str()).collect();
    let missing_pred: Vec<&str> = gold_ids.iter().copied().filter(|id| !pred_by_id.contains_key(id)).collect();
    let missing_gold: BTreeSet<&str> = pred_by_id.keys().copied().filter(|id| !gold_ids.contains(id)).collect();
    if !missing_pred.is_empty() || !missing_gold.is_empty() {
        let mut msg = String::from("pred/gold doc_id mismatch");
        if !missing_pred.is_empty() {
            let _ = write!(msg, "; missing from pred: {}", missing_pred.join(", "));
        }
        if !missing_gold.is_empty() {
            let ids: Vec<&str> = missing_gold.into_iter().collect();
            let _ = write!(msg, "; missing from gold: {}", ids.join(", "));
        }
        return Err(Error::Data(msg));
    }

    let mut documents = Vec::with_capacity(gold.len());
    let (mut matched, mut predicted, mut gold_total) = (0, 0, 0);
    for (id, gold_tree) in gold {
        let score = unlabeled_span_f1(pred_by_id[id.as_str()], gold_tree)
            .map_err(|e| Error::Data(format!("document {id}: {e}")))?;
        matched += score.matched;
        predicted += score.predicted;
        gold_total += score.gold;
        documents.push(DocScore {
            id: id.clone(),
            leaves: gold_tree.leaf_count(),
            score,
        });
    }
    Ok(EvalReport {
        documents,
        micro: SpanScore::from_counts(matched, predicted, gold_total),
    })
}

/// One baseline tree per gold document, drawn in gold order from a single
/// generator seeded with `seed`.
pub fn baseline_predictions(kind: BaselineKind, gold: &[(String, BinaryTree)], seed: u64) -> Vec<(String, BinaryTree)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gold.iter()
        .map(|(id, t)| {
            let tree = baseline_tree_with_rng(kind, t.leaf_count(), &mut rng).expect("gold trees have >= 1 leaf");
            (id.clone(), tree)
        })
        .collect()
}

impl EvalReport {
    /// Tab-separated table, one row per document and a final `micro` row.
    /// Scores use shortest round-trip decimal form.
    pub fn render(&self) -> String {
        let mut out = String::from("doc_id\tleaves\tmatched\tpred_spans\tgold_spans\tprecision\trecall\tf1\n");
        let mut row = |id: &str, leaves: usize, s: &SpanScore| {
            let _ = writeln!(
                out,
                "{id}\t{leaves}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.matched, s.predicted, s.gold, s.precision, s.recall, s.f1
            );
        };
        for d in &self.documents {
            row(&d.id, d.leaves, &d.score);
        }
        let leaves = self.documents.iter().map(|d| d.leaves).sum();
        row("micro", leaves, &self.micro);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeStats {
    pub rows: Vec<(String, usize, usize)>,
    pub mean_leaves: f64,
    pub mean_height: f64,
    /// Internal nodes with an internal left child, over all internal nodes of
    /// trees with at least 3 leaves. `None` when there are no such trees.
    pub left_branching: Option<f64>,
}

pub fn tree_stats(trees: &[(String, BinaryTree)]) -> TreeStats {
    let rows: Vec<(String, usize, usize)> = trees
        .iter()
        .map(|(id, t)| (id.clone(), t.leaf_count(), t.height()))
        .collect();
    let n = rows.len().max(1) as f64;
    let (mut left, mut internal) = (0usize, 0usize);
    for (_, t) in trees.iter().filter(|(_, t)| t.leaf_count() >= 3) {
        left += t.internal_left_children();
        internal += t.internal_count();
    }
    TreeStats {
        mean_leaves: rows.iter().map(|r| r.1 as f64).sum::<f64>() / n,
        mean_height: rows.iter().map(|r| r.2 as f64).sum::<f64>() / n,
        left_branching: (internal > 0).then(|| left as f64 / internal as f64),
        rows,
    }
}

impl TreeStats {
    pub fn render(&self) -> String {
        let mut out = String::from("doc_id\tleaves\theight\n");
        for (id, leaves, height) in &self.rows {
            let _ = writeln!(out, "{id}\t{leaves}\t{height}");
        }
        let _ = writeln!(out, "documents\t{}", self.rows.len());
        let _ = writeln!(out, "mean_leaves\t{}", self.mean_leaves);
        let _ = writeln!(out, "mean_height\t{}", self.mean_height);
        match self.left_branching {
            Some(p) => {
                let _ = writeln!(out, "left_branching\t{p}");
            }
            None => out.push_str("left_branching\tn/a\n"),
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> BinaryTree {
        BinaryTree::parse_bracketed(s).unwrap()
    }

    #[test]
    fn left_baseline_against_balanced_gold() {
        let gold = vec![("d1".to_string(), parse("( ( 0 1 ) ( 2 3 ) )"))];
        let pred = baseline_predictions(BaselineKind::Left, &gold, 0);
        let report = evaluate(&pred, &gold).unwrap();
        assert_eq!(report.micro.matched, 2);
        assert_eq!(report.micro.precision, 2.0 / 3.0);
        assert_eq!(report.micro.recall, 2.0 / 3.0);
        assert!(report.render().lines().last().unwrap().starts_with("micro\t4\t2\t3\t3\t"));
    }

    #[test]
    fn micro_average_pools_counts() {
        let gold = vec![
            ("a".to_string(), parse("( ( 0 1 ) ( 2 3 ) )")),
            ("b".to_string(), parse("( 0 1 )")),
        ];
        let pred = vec![
            ("b".to_string(), parse("( 0 1 )")),
            ("a".to_string(), parse("( 0 ( 1 ( 2 3 ) ) )")),
        ];
        let r = evaluate(&pred, &gold).unwrap();
        assert_eq!(r.documents[0].id, "a");
        assert_eq!((r.micro.matched, r.micro.predicted, r.micro.gold), (3, 4, 4));
        assert_eq!(r.micro.f1, 0.75);
    }

    #[test]
    fn mismatched_ids_listed() {
        let gold = vec![("a".to_string(), parse("0")), ("b".to_string(), parse("0"))];
        let pred = vec![("a".to_string(), parse("0")), ("z".to_string(), parse("0"))];
        let msg = evaluate(&pred, &gold).unwrap_err().to_string();
        assert!(msg.contains("missing from pred: b"), "{msg}");
        assert!(msg.contains("missing from gold: z"), "{msg}");
    }

    #[test]
    fn stats_left_branching_proportion() {
        let trees = vec![
            ("l".to_string(), parse("( ( ( 0 1 ) 2 ) 3 )")),
            ("r".to_string(), parse("( 0 ( 1 ( 2 3 ) ) )")),
            ("two".to_string(), parse("( 0 1 )")),
            ("one".to_string(), parse("0")),
        ];
        let s = tree_stats(&trees);
        // 2 of the 6 internal nodes in the two 4-leaf trees have an internal left child.
        assert_eq!(s.left_branching, Some(2.0 / 6.0));
        assert_eq!(s.rows[0], ("l".to_string(), 4, 3));
        assert_eq!(s.mean_leaves, 11.0 / 4.0);
        assert_eq!(tree_stats(&trees[2..]).left_branching, None);
    }
}
