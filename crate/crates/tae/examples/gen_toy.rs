//! Regenerates the bundled toy corpus under `data/`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use tae::io::{write_corpus, write_embeddings, write_trees};
use tae::toy::{generate, ToySpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&dir)?;
    let toy = generate(&ToySpec::default());
    let mut out = BufWriter::new(File::create(dir.join("toy_embeddings.txt"))?);
    write_embeddings(&mut out, &toy.embeddings)?;
    out.flush()?;
    let mut out = BufWriter::new(File::create(dir.join("toy_corpus.jsonl"))?);
    write_corpus(&mut out, &toy.documents)?;
    out.flush()?;
    let mut out = BufWriter::new(File::create(dir.join("toy_gold.tsv"))?);
    write_trees(&mut out, &toy.gold)?;
    out.flush()?;
    Ok(())
}
