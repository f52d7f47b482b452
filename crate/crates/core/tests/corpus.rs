use proptest::prelude::*;
use tae_core::{EduDocument, EmbeddingTable, OovStats};

fn table(vectors: &[Vec<f64>]) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(vectors[0].len()).unwrap();
    for (i, v) in vectors.iter().enumerate() {
        t.insert(&format!("w{i}"), v.clone()).unwrap();
    }
    t
}

#[test]
fn examples() {
    let mut t = EmbeddingTable::new(2).unwrap();
    t.insert("a", vec![1.0, 3.0]).unwrap();
    t.insert("b", vec![3.0, 5.0]).unwrap();
    let mut stats = OovStats::default();
    assert_eq!(t.edu_embedding(&["a", "b"], &mut stats).unwrap(), [2.0, 4.0]);
    assert_eq!(t.edu_embedding(&["a", "zzz"], &mut stats).unwrap(), [1.0, 3.0]);
    assert_eq!(t.edu_embedding(&["zzz"], &mut stats).unwrap(), [0.0, 0.0]);
    assert_eq!((stats.tokens, stats.oov_tokens, stats.edus, stats.all_oov_edus), (5, 2, 3, 1));
    assert!(t.edu_embedding::<&str>(&[], &mut stats).is_err());
    // Case is kept: "A" is a different word.
    assert_eq!(t.edu_embedding(&["A"], &mut stats).unwrap(), [0.0, 0.0]);
}

#[test]
fn first_duplicate_wins_with_warning() {
    let mut t = EmbeddingTable::new(1).unwrap();
    assert!(t.insert("a", vec![1.0]).unwrap());
    assert!(!t.insert("a", vec![2.0]).unwrap());
    assert_eq!(t.get("a").unwrap(), [1.0]);
    assert_eq!(t.warnings().len(), 1);
    assert!(t.insert("b", vec![1.0, 2.0]).is_err());
}

#[test]
fn document_validation() {
    assert!(EduDocument::new("d", vec![]).is_err());
    assert!(EduDocument::new("d", vec![vec!["a".into()], vec![]]).is_err());
    let doc = EduDocument::new("d", vec![vec!["w0".into()], vec!["w1".into(), "w0".into()]]).unwrap();
    let t = table(&[vec![1.0], vec![3.0]]);
    let e = t.document_embeddings(&doc, &mut OovStats::default()).unwrap();
    assert_eq!(e, [vec![1.0], vec![2.0]]);
}

fn vectors() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), 1..8))
}

proptest! {
    #[test]
    fn mean_is_permutation_invariant_and_bounded(
        vecs in vectors(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..10),
        shuffle_seed in any::<u64>(),
    ) {
        let t = table(&vecs);
        let tokens: Vec<String> = picks.iter().map(|i| format!("w{}", i.index(vecs.len()))).collect();
        let mut permuted = tokens.clone();
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        permuted.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));

        let mut stats = OovStats::default();
        let a = t.edu_embedding(&tokens, &mut stats).unwrap();
        let b = t.edu_embedding(&permuted, &mut stats).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        for (k, &v) in a.iter().enumerate() {
            let comps = picks.iter().map(|i| vecs[i.index(vecs.len())][k]);
            let lo = comps.clone().fold(f64::INFINITY, f64::min);
            let hi = comps.fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} outside [{}, {}]", v, lo, hi);
        }
    }
}
