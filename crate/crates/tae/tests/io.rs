use std::collections::BTreeMap;

use proptest::prelude::*;
use tae::io::{emit_loss_table, parse_corpus, parse_embeddings, parse_loss_table, parse_trees, write_corpus, write_embeddings, write_trees};
use tae_core::trainer::{phase_of, EpochRecord};
use tae_core::{BinaryTree, EduDocument, MergeTrace};

fn arb_doc() -> impl Strategy<Value = EduDocument> {
    (
        "[a-zA-Z0-9_.-]{1,10}",
        prop::collection::vec(prop::collection::vec("[^\\s\\x00]{1,6}", 1..5), 1..6),
    )
        .prop_map(|(id, edus)| EduDocument::new(id, edus).unwrap())
}

proptest! {
    #[test]
    fn corpus_round_trip(docs in prop::collection::vec(arb_doc(), 0..5)) {
        let mut out = Vec::new();
        write_corpus(&mut out, &docs).unwrap();
        let back = parse_corpus(out.as_slice(), "mem").unwrap();
        prop_assert_eq!(back, docs);
    }

    #[test]
    fn embeddings_round_trip(
        words in prop::collection::btree_map("[a-z]{1,6}", prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3), 1..10)
    ) {
        let mut table = tae_core::EmbeddingTable::new(3).unwrap();
        for (w, v) in &words {
            table.insert(w, v.clone()).unwrap();
        }
        let mut out = Vec::new();
        write_embeddings(&mut out, &table).unwrap();
        let back = parse_embeddings(out.as_slice(), "mem").unwrap();
        let got: BTreeMap<String, Vec<f64>> = back.iter().map(|(w, v)| (w.to_string(), v.to_vec())).collect();
        prop_assert_eq!(got, words);
    }

    #[test]
    fn trees_round_trip(traces in prop::collection::vec((1usize..10, prop::collection::vec(any::<prop::sample::Index>(), 9)), 1..6)) {
        let trees: Vec<(String, BinaryTree)> = traces
            .iter()
            .enumerate()
            .map(|(k, (n, picks))| {
                let trace: Vec<usize> = (0..n - 1).map(|t| picks[t].index(n - t - 1)).collect();
                (format!("doc{k}"), MergeTrace(trace).to_tree(*n).unwrap())
            })
            .collect();
        let mut out = Vec::new();
        write_trees(&mut out, &trees).unwrap();
        prop_assert_eq!(parse_trees(out.as_slice(), "mem").unwrap(), trees);
    }

    #[test]
    fn loss_table_round_trip(losses in prop::collection::vec(0.0f64..100.0, 1..30), pl in 1usize..5) {
        let history: Vec<EpochRecord> = losses
            .iter()
            .enumerate()
            .map(|(epoch, &mean_loss)| EpochRecord { epoch, phase: phase_of(epoch, pl), mean_loss, temperature: 1.0 })
            .collect();
        let text = emit_loss_table(&history);
        prop_assert_eq!(text.lines().count(), history.len() + 1);
        let rows = parse_loss_table(text.as_bytes()).unwrap();
        for (row, rec) in rows.iter().zip(&history) {
            prop_assert_eq!(row.0, rec.epoch);
            prop_assert_eq!(row.1, rec.phase);
            prop_assert!((row.2 - rec.mean_loss).abs() <= 1e-12);
        }
    }
}

#[test]
fn malformed_inputs_report_line_numbers() {
    let err = parse_embeddings("a 1 2\nb 1\n".as_bytes(), "emb").unwrap_err().to_string();
    assert!(err.contains("emb") && err.contains('2'), "{err}");
    let err = parse_corpus("{\"id\":\"a\",\"edus\":[[\"x\"]]}\n{\"id\":\"b\"}\n".as_bytes(), "c").unwrap_err().to_string();
    assert!(err.contains('2'), "{err}");
    assert!(parse_trees("a\t( 0 1 )\na\t0\n".as_bytes(), "t").is_err());
    assert!(parse_trees("a ( 0 1 )\n".as_bytes(), "t").is_err());
}
