//! `tae` command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use tae_core::trainer::TrainingDoc;
use tae_core::{BaselineKind, BinaryTree, EduDocument, EmbeddingTable, ModelParams, OovStats, TrainConfig, Trainer};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::{now_unix_ms, InputDigest, RunManifest};
use crate::report;

pub const CHECKPOINT_FILE: &str = "checkpoint.tae";
pub const LOSS_FILE: &str = "loss.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "tae", version, about = "Unsupervised discourse tree induction with a tree autoencoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write checkpoint, loss table and run manifest.
    Train(TrainArgs),
    /// Induce one tree per document with a trained model.
    Induce(InduceArgs),
    /// Score predicted (or baseline) trees against gold trees.
    Eval(EvalArgs),
    /// Summarize a tree file.
    Stats(StatsArgs),
}

const RESUME_CONFLICTS: [&str; 7] = ["hidden", "seed", "phase_length", "lr", "temp", "temp_decay", "temp_min"];

#[derive(Args, Debug)]
struct TrainArgs {
    /// JSONL corpus, one {"id", "edus"} object per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Whitespace-separated word vectors.
    #[arg(long)]
    embeddings: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Total number of epochs (including those already run when resuming).
    #[arg(long, default_value_t = TrainConfig::DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    phase_length: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Initial Gumbel-Softmax temperature.
    #[arg(long)]
    temp: Option<f64>,
    #[arg(long)]
    temp_decay: Option<f64>,
    #[arg(long)]
    temp_min: Option<f64>,
    /// Continue from a checkpoint; its stored configuration is reused.
    #[arg(long, conflicts_with_all = RESUME_CONFLICTS)]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InduceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Output tree file.
    #[arg(long)]
    out: PathBuf,
    /// Word vectors; defaults to the file recorded in the run manifest next
    /// to the checkpoint.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, required_unless_present = "baseline")]
    pred: Option<PathBuf>,
    #[arg(long)]
    gold: PathBuf,
    /// Score a generated baseline instead of --pred.
    #[arg(long, value_parser = ["left", "right", "balanced", "random"])]
    baseline: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    trees: PathBuf,
}

/// Runs the CLI. Exit codes: 0 success, 1 data or validation error, 2 usage.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    if !rendered.contains("Usage:") {
                        let _ = writeln!(stderr, "\n{}", Cli::command().render_usage());
                    }
                    2
                }
            };
        }
    };
    let result = match cli.command {
        Command::Train(args) => train(args, stderr),
        Command::Induce(args) => induce(args),
        Command::Eval(args) => eval(args, stdout),
        Command::Stats(args) => stats(args, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn embed_corpus(table: &EmbeddingTable, docs: &[EduDocument], stderr: &mut dyn Write) -> Result<Vec<TrainingDoc>> {
    let mut stats = OovStats::default();
    let out = docs
        .iter()
        .map(|d| {
            Ok(TrainingDoc {
                id: d.id().to_string(),
                embeddings: table.document_embeddings(d, &mut stats)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let _ = writeln!(
        stderr,
        "oov: {}/{} tokens, {}/{} EDUs with no known token",
        stats.oov_tokens, stats.tokens, stats.all_oov_edus, stats.edus
    );
    Ok(out)
}

fn load_embeddings_noisy(path: &Path, stderr: &mut dyn Write) -> Result<EmbeddingTable> {
    let table = io::load_embeddings(path)?;
    for w in table.warnings() {
        let _ = writeln!(stderr, "warning: {w}");
    }
    Ok(table)
}

fn train(args: TrainArgs, stderr: &mut dyn Write) -> Result<()> {
    let table = load_embeddings_noisy(&args.embeddings, stderr)?;
    let corpus = io::load_corpus(&args.corpus)?;
    if corpus.is_empty() {
        return Err(Error::Data(format!("{}: corpus has no documents", args.corpus.display())));
    }
    let docs = embed_corpus(&table, &corpus, stderr)?;

    let (mut trainer, resumed_from) = match &args.resume {
        Some(path) => {
            let digest = InputDigest::of("checkpoint", path)?;
            let mut trainer = load_checkpoint(path)?.into_trainer()?;
            if trainer.config().embedding_dim != table.dim() {
                return Err(Error::Data(format!(
                    "checkpoint expects {}-dimensional embeddings, {} has {}",
                    trainer.config().embedding_dim,
                    args.embeddings.display(),
                    table.dim()
                )));
            }
            if args.epochs < trainer.epoch() {
                return Err(Error::Data(format!(
                    "--epochs {} is below the {} epochs already in the checkpoint",
                    args.epochs,
                    trainer.epoch()
                )));
            }
            trainer.set_epochs(args.epochs);
            (trainer, Some(digest))
        }
        None => {
            let mut config = TrainConfig::new(table.dim());
            config.epochs = args.epochs;
            config.hidden_dim = args.hidden.unwrap_or(config.hidden_dim);
            config.seed = args.seed.unwrap_or(config.seed);
            config.phase_length = args.phase_length.unwrap_or(config.phase_length);
            config.learning_rate = args.lr.unwrap_or(config.learning_rate);
            config.temperature_start = args.temp.unwrap_or(config.temperature_start);
            config.temperature_decay = args.temp_decay.unwrap_or(config.temperature_decay);
            config.temperature_min = args.temp_min.unwrap_or(config.temperature_min);
            (Trainer::new(config)?, None)
        }
    };

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let inputs = vec![
        InputDigest::of("corpus", &args.corpus)?,
        InputDigest::of("embeddings", &args.embeddings)?,
    ];
    let mut manifest = RunManifest::new(trainer.config(), inputs, resumed_from);
    let manifest_path = args.out.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;

    let total = trainer.config().epochs;
    trainer.run(&docs, |r| {
        let _ = writeln!(
            stderr,
            "epoch {}/{} {} loss={:.6} temp={:.4}",
            r.epoch + 1,
            total,
            r.phase.as_char(),
            r.mean_loss,
            r.temperature
        );
    })?;

    save_checkpoint(&args.out.join(CHECKPOINT_FILE), &Checkpoint::from_trainer(&trainer))?;
    let loss_path = args.out.join(LOSS_FILE);
    if !trainer.history().is_empty() {
        fs::write(&loss_path, io::emit_loss_table(trainer.history())).map_err(|e| Error::io(&loss_path, e))?;
    }
    manifest.finished_unix_ms = Some(now_unix_ms());
    manifest.save(&manifest_path)
}

fn induce(args: InduceArgs) -> Result<()> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let embeddings_path = match args.embeddings {
        Some(p) => p,
        None => {
            let dir = args.checkpoint.parent().unwrap_or(Path::new("."));
            let manifest = RunManifest::load(&dir.join(MANIFEST_FILE)).map_err(|e| {
                Error::Data(format!("no --embeddings given and no usable run manifest beside the checkpoint: {e}"))
            })?;
            manifest
                .input("embeddings")
                .map(|i| i.path.clone())
                .ok_or_else(|| Error::Data("run manifest records no embeddings file".into()))?
        }
    };
    let table = io::load_embeddings(&embeddings_path)?;
    if table.dim() != checkpoint.params.input_dim() {
        return Err(Error::Data(format!(
            "checkpoint expects {}-dimensional embeddings, {} has {}",
            checkpoint.params.input_dim(),
            embeddings_path.display(),
            table.dim()
        )));
    }
    let corpus = io::load_corpus(&args.corpus)?;
    let trees = induce_all(&checkpoint.params, &table, &corpus)?;
    let file = fs::File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut out = BufWriter::new(file);
    io::write_trees(&mut out, &trees)?;
    out.flush().map_err(|e| Error::io(&args.out, e))
}

/// Encodes documents on worker threads; output keeps input order.
pub fn induce_all(params: &ModelParams, table: &EmbeddingTable, corpus: &[EduDocument]) -> Result<Vec<(String, BinaryTree)>> {
    let workers = thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let chunk = corpus.len().div_ceil(workers).max(1);
    let chunks: Vec<Result<Vec<(String, BinaryTree)>>> = thread::scope(|s| {
        let handles: Vec<_> = corpus
            .chunks(chunk)
            .map(|docs| {
                s.spawn(move || {
                    let mut stats = OovStats::default();
                    docs.iter()
                        .map(|d| {
                            let emb = table.document_embeddings(d, &mut stats)?;
                            let (tree, _) = params.induce(&emb)?;
                            Ok((d.id().to_string(), tree))
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("induce worker panicked")).collect()
    });
    let mut trees = Vec::with_capacity(corpus.len());
    for c in chunks {
        trees.extend(c?);
    }
    Ok(trees)
}

fn eval(args: EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let gold = io::load_trees(&args.gold)?;
    let pred = match (&args.baseline, &args.pred) {
        (Some(kind), _) => {
            let kind: BaselineKind = kind.parse()?;
            report::baseline_predictions(kind, &gold, args.seed)
        }
        (None, Some(path)) => io::load_trees(path)?,
        (None, None) => unreachable!("clap requires --pred without --baseline"),
    };
    let report = report::evaluate(&pred, &gold)?;
    write!(stdout, "{}", report.render())?;
    Ok(())
}

fn stats(args: StatsArgs, stdout: &mut dyn Write) -> Result<()> {
    let trees = io::load_trees(&args.trees)?;
    write!(stdout, "{}", report::tree_stats(&trees).render())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("tae").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_capture(&[]).0, 2);
        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["eval", "--gold", "g.tsv"]).0, 2);
        let (code, _, err) = run_capture(&["eval", "--gold", "g", "--baseline", "diagonal"]);
        assert_eq!(code, 2);
        assert!(err.contains("Usage"), "{err}");
        let (code, _, _) = run_capture(&["train", "--corpus", "c", "--embeddings", "e", "--out", "o", "--resume", "x", "--lr", "1"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("induce"));
    }

    #[test]
    fn missing_file_is_data_error() {
        let (code, _, err) = run_capture(&["stats", "--trees", "/nonexistent/trees.tsv"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error: "), "{err}");
    }
}
