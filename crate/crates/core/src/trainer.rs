//! Phased training.
//!
//! Epochs alternate between two phases. In a weights phase the selector runs
//! in argmax mode and only the composition, split and projection weights are
//! updated; in a structure phase the selector samples with Gumbel noise and
//! only the query vector is updated. Each document takes one plain SGD step.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Graph;
use crate::decoder::{decode_document, reconstruction_loss};
use crate::encoder::{encode_document, Selector};
use crate::error::{Error, Result};
use crate::params::{group_of, ModelParams, ParamGroup};
use crate::tensor::Tensor;
use crate::trees::BinaryTree;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub phase_length: usize,
    pub learning_rate: f64,
    pub temperature_start: f64,
    pub temperature_min: f64,
    pub temperature_decay: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainConfig {
    pub const DEFAULT_EPOCHS: usize = 200;
    pub const DEFAULT_HIDDEN: usize = 32;
    pub const DEFAULT_PHASE_LENGTH: usize = 40;
    pub const DEFAULT_LEARNING_RATE: f64 = 5.0;

    /// Defaults for everything but the embedding dimension.
    pub fn new(embedding_dim: usize) -> Self {
        Self {
            embedding_dim,
            hidden_dim: Self::DEFAULT_HIDDEN,
            epochs: Self::DEFAULT_EPOCHS,
            phase_length: Self::DEFAULT_PHASE_LENGTH,
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            temperature_start: 1.0,
            temperature_min: 0.1,
            temperature_decay: 0.99,
            seed: 0,
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return fail("embedding and hidden dimensions must be positive".into());
        }
        if self.phase_length == 0 {
            return fail("phase_length must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.temperature_min > 0.0 && self.temperature_min.is_finite()) {
            return fail(format!("temperature_min must be positive, got {}", self.temperature_min));
        }
        if !(self.temperature_start >= self.temperature_min && self.temperature_start.is_finite()) {
            return fail(format!(
                "temperature_start {} must be finite and >= temperature_min {}",
                self.temperature_start, self.temperature_min
            ));
        }
        if !(self.temperature_decay > 0.0 && self.temperature_decay <= 1.0) {
            return fail(format!("temperature_decay must lie in (0, 1], got {}", self.temperature_decay));
        }
        Ok(())
    }

    /// Temperature for the epoch after one at `current`.
    pub fn anneal(&self, current: f64) -> f64 {
        (current * self.temperature_decay).max(self.temperature_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Weights,
    Structure,
}

impl Phase {
    pub fn as_char(self) -> char {
        match self {
            Phase::Weights => 'W',
            Phase::Structure => 'S',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'W' => Some(Phase::Weights),
            'S' => Some(Phase::Structure),
            _ => None,
        }
    }

    pub fn group(self) -> ParamGroup {
        match self {
            Phase::Weights => ParamGroup::Weights,
            Phase::Structure => ParamGroup::Structure,
        }
    }
}

/// Even blocks of `phase_length` epochs fit weights, odd blocks fit structure.
pub fn phase_of(epoch: usize, phase_length: usize) -> Phase {
    assert!(phase_length >= 1, "phase_length must be at least 1");
    if (epoch / phase_length).is_multiple_of(2) {
        Phase::Weights
    } else {
        Phase::Structure
    }
}

/// A document ready for training: its id and one encoding per EDU.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDoc {
    pub id: String,
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub mean_loss: f64,
    pub temperature: f64,
}

/// Loss and induced tree of one document step.
#[derive(Debug, Clone)]
pub struct DocStep {
    pub loss: f64,
    pub tree: BinaryTree,
}

/// Forward, backward and one SGD update of the `phase` group on one document.
pub fn document_step(
    params: &mut ModelParams,
    doc: &TrainingDoc,
    phase: Phase,
    temperature: f64,
    learning_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DocStep> {
    let dim = params.input_dim();
    if doc.embeddings.is_empty() {
        return Err(Error::Document {
            doc: doc.id.clone(),
            message: "document has no EDUs".into(),
        });
    }
    if let Some(bad) = doc.embeddings.iter().find(|e| e.len() != dim) {
        return Err(Error::Document {
            doc: doc.id.clone(),
            message: format!("EDU encoding has dimension {}, model expects {dim}", bad.len()),
        });
    }

    let active = phase.group();
    let mut graph = Graph::new();
    let bound = params.bind(&mut graph, Some(active));
    let targets = doc
        .embeddings
        .iter()
        .map(|e| Ok(graph.constant(Tensor::vector(e.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    let selector = match phase {
        Phase::Structure => Selector::Sample { temperature },
        Phase::Weights => Selector::Argmax { temperature },
    };
    let encoded = encode_document(&mut graph, &targets, &bound.encoder, &selector, rng)?;
    let decoded = decode_document(&mut graph, encoded.root, &encoded.tree, &bound.decoder)?;
    debug_assert_eq!(decoded.traversal, encoded.tree, "decoder must follow the encoder tree");
    let loss_id = reconstruction_loss(&mut graph, &decoded.reconstructions, &targets)?;
    let loss = graph.value(loss_id).values()[0];
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { doc: doc.id.clone() });
    }
    graph.backward(loss_id)?;

    for ((name, tensor), id) in params.tensors_mut().into_iter().zip(bound.ids()) {
        if group_of(name) != active {
            continue;
        }
        let grad = graph.grad(id).expect("active tensors are trainable");
        for (v, g) in tensor.values_mut().iter_mut().zip(grad) {
            *v -= learning_rate * g;
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFiniteLoss { doc: doc.id.clone() });
    }
    Ok(DocStep {
        loss,
        tree: encoded.tree,
    })
}

/// One pass over `docs`; returns the mean per-document loss.
pub fn train_epoch(
    docs: &[TrainingDoc],
    params: &mut ModelParams,
    phase: Phase,
    temperature: f64,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument("training corpus is empty".into()));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    if config.shuffle {
        order.shuffle(rng);
    }
    let mut total = 0.0;
    for k in order {
        total += document_step(params, &docs[k], phase, temperature, config.learning_rate, rng)?.loss;
    }
    Ok(total / docs.len() as f64)
}

/// Exact position of the training generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Resumable training state: everything a checkpoint needs.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    params: ModelParams,
    epoch: usize,
    temperature: f64,
    rng: ChaCha8Rng,
    history: Vec<EpochRecord>,
}

impl Trainer {
    /// Fresh state: parameters drawn from the seeded generator.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = ModelParams::init_uniform(config.embedding_dim, config.hidden_dim, &mut rng)?;
        Ok(Self {
            temperature: config.temperature_start,
            config,
            params,
            epoch: 0,
            rng,
            history: Vec::new(),
        })
    }

    pub fn restore(
        config: TrainConfig,
        params: ModelParams,
        epoch: usize,
        temperature: f64,
        rng: RngState,
        history: Vec<EpochRecord>,
    ) -> Result<Self> {
        config.validate()?;
        if params.input_dim() != config.embedding_dim || params.hidden() != config.hidden_dim {
            return Err(Error::Config(format!(
                "parameters are {}x{}, config says {}x{}",
                params.input_dim(),
                params.hidden(),
                config.embedding_dim,
                config.hidden_dim
            )));
        }
        if history.len() != epoch {
            return Err(Error::Config(format!(
                "history has {} entries for epoch counter {epoch}",
                history.len()
            )));
        }
        Ok(Self {
            config,
            params,
            epoch,
            temperature,
            rng: rng.restore(),
            history,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Changes the total epoch budget, e.g. to extend a resumed run.
    pub fn set_epochs(&mut self, epochs: usize) {
        self.config.epochs = epochs;
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng)
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    pub fn into_parts(self) -> (ModelParams, Vec<EpochRecord>) {
        (self.params, self.history)
    }

    pub fn run_epoch(&mut self, docs: &[TrainingDoc]) -> Result<EpochRecord> {
        let phase = phase_of(self.epoch, self.config.phase_length);
        let mean_loss = train_epoch(docs, &mut self.params, phase, self.temperature, &self.config, &mut self.rng)?;
        let record = EpochRecord {
            epoch: self.epoch,
            phase,
            mean_loss,
            temperature: self.temperature,
        };
        self.history.push(record);
        self.epoch += 1;
        self.temperature = self.config.anneal(self.temperature);
        Ok(record)
    }

    /// Runs epochs until the configured total is reached, reporting each.
    pub fn run(&mut self, docs: &[TrainingDoc], mut on_epoch: impl FnMut(&EpochRecord)) -> Result<()> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("training corpus is empty".into()));
        }
        while self.epoch < self.config.epochs {
            let record = self.run_epoch(docs)?;
            on_epoch(&record);
        }
        Ok(())
    }
}

/// Trains from scratch; returns the final parameters and per-epoch records.
pub fn train(config: TrainConfig, docs: &[TrainingDoc]) -> Result<(ModelParams, Vec<EpochRecord>)> {
    let mut trainer = Trainer::new(config)?;
    trainer.run(docs, |_| {})?;
    Ok(trainer.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn phase_parity() {
        let seq = |len, n| (0..n).map(|e| phase_of(e, len).as_char()).collect::<String>();
        assert_eq!(seq(1, 4), "WSWS");
        assert_eq!(seq(2, 6), "WWSSWW");
        assert_eq!(phase_of(25, 10), Phase::Weights);
        assert_eq!(phase_of(15, 10), Phase::Structure);
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::new(4);
        ok.validate().unwrap();
        let mut c = ok.clone();
        c.temperature_decay = 1.5;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.temperature_min = 2.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.phase_length = 0;
        assert!(c.validate().is_err());
        let mut c = ok;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn temperature_schedule_is_bounded() {
        let c = TrainConfig::new(4);
        let mut t = c.temperature_start;
        for _ in 0..1000 {
            let next = c.anneal(t);
            assert!(next <= t && next >= c.temperature_min);
            t = next;
        }
        assert_eq!(t, c.temperature_min);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let mut c = TrainConfig::new(2);
        c.hidden_dim = 3;
        c.epochs = 0;
        let docs = [TrainingDoc { id: "d".into(), embeddings: vec![vec![1.0, 0.0]] }];
        let (params, history) = train(c.clone(), &docs).unwrap();
        assert!(history.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        assert!(params.bit_eq(&ModelParams::init_uniform(2, 3, &mut rng).unwrap()));
    }

    #[test]
    fn empty_corpus_and_bad_dims_rejected() {
        let mut c = TrainConfig::new(2);
        c.hidden_dim = 3;
        assert!(train(c.clone(), &[]).is_err());
        let docs = [TrainingDoc { id: "d7".into(), embeddings: vec![vec![1.0]] }];
        let err = train(c, &docs).unwrap_err();
        assert!(matches!(err, Error::Document { ref doc, .. } if doc == "d7"));
    }

    #[test]
    fn non_finite_loss_names_document() {
        let mut c = TrainConfig::new(1);
        c.hidden_dim = 1;
        c.epochs = 1;
        let docs = [TrainingDoc { id: "bad".into(), embeddings: vec![vec![f64::INFINITY]] }];
        assert_eq!(train(c, &docs).unwrap_err(), Error::NonFiniteLoss { doc: "bad".into() });
    }

    #[test]
    fn rng_state_round_trip() {
        use rand::RngCore;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..37 {
            rng.next_u32();
        }
        let mut restored = RngState::capture(&rng).restore();
        assert_eq!(rng.next_u64(), restored.next_u64());
    }
}
