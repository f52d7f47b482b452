//! Deterministic synthetic corpus for smoke tests and demos.
//!
//! Words belong to a handful of topics; a word vector is its topic centroid
//! plus a shared offset and small noise. Each document is grown from a
//! random gold tree: the left child keeps its parent's topic and the right
//! child switches topic with probability one half, so EDUs that are close in
//! the gold tree tend to share vocabulary.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tae_core::trees::{baseline_tree_with_rng, BaselineKind};
use tae_core::{BinaryTree, EduDocument, EmbeddingTable};

#[derive(Debug, Clone)]
pub struct ToySpec {
    pub seed: u64,
    pub dim: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub documents: usize,
    pub min_edus: usize,
    pub max_edus: usize,
    /// Half-width of the uniform per-word noise around its topic centroid.
    pub word_noise: f64,
    /// Probability that a token is drawn from a random topic.
    pub off_topic: f64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            seed: 2020,
            dim: 16,
            topics: 6,
            words_per_topic: 10,
            documents: 20,
            min_edus: 3,
            max_edus: 8,
            word_noise: 0.1,
            off_topic: 0.1,
        }
    }
}

pub struct ToyCorpus {
    pub embeddings: EmbeddingTable,
    pub documents: Vec<EduDocument>,
    pub gold: Vec<(String, BinaryTree)>,
}

const SCALE: f64 = 1.0;

fn word(topic: usize, k: usize) -> String {
    format!("t{topic}w{k}")
}

// Three decimals, as written to the bundled embedding file.
fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

pub fn generate(spec: &ToySpec) -> ToyCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offset: Vec<f64> = (0..spec.dim).map(|_| rng.gen_range(-0.2..0.2)).collect();
    let centroids: Vec<Vec<f64>> = (0..spec.topics)
        .map(|_| (0..spec.dim).map(|_| rng.gen_range(-SCALE..SCALE)).collect())
        .collect();

    let mut embeddings = EmbeddingTable::new(spec.dim).expect("positive dim");
    for (t, centroid) in centroids.iter().enumerate() {
        for k in 0..spec.words_per_topic {
            let v = centroid
                .iter()
                .zip(&offset)
                .map(|(c, o)| round3(c + o + rng.gen_range(-spec.word_noise..spec.word_noise)))
                .collect();
            embeddings.insert(&word(t, k), v).expect("dim matches");
        }
    }

    let mut documents = Vec::with_capacity(spec.documents);
    let mut gold = Vec::with_capacity(spec.documents);
    for d in 0..spec.documents {
        let n = rng.gen_range(spec.min_edus..=spec.max_edus);
        let tree = baseline_tree_with_rng(BaselineKind::Random, n, &mut rng).expect("n >= 1");
        let mut topics = vec![0; n];
        let root_topic = rng.gen_range(0..spec.topics);
        assign_topics(&tree, root_topic, spec.topics, &mut rng, &mut topics);
        let edus = topics
            .iter()
            .map(|&t| {
                let len = rng.gen_range(2..=5);
                (0..len)
                    .map(|_| {
                        // Occasional off-topic word.
                        let topic = if rng.gen_bool(spec.off_topic) { rng.gen_range(0..spec.topics) } else { t };
                        word(topic, rng.gen_range(0..spec.words_per_topic))
                    })
                    .collect()
            })
            .collect();
        let id = format!("toy{d:02}");
        documents.push(EduDocument::new(id.clone(), edus).expect("non-empty EDUs"));
        gold.push((id, tree));
    }
    ToyCorpus {
        embeddings,
        documents,
        gold,
    }
}

fn assign_topics(tree: &BinaryTree, topic: usize, topics: usize, rng: &mut ChaCha8Rng, out: &mut [usize]) {
    match tree {
        BinaryTree::Leaf(i) => out[*i] = topic,
        BinaryTree::Internal(l, r) => {
            let right = if rng.gen_bool(0.5) { rng.gen_range(0..topics) } else { topic };
            assign_topics(l, topic, topics, rng, out);
            assign_topics(r, right, topics, rng, out);
        }
    }
}
