//! Write a rating file generated by a known interaction function, plus a
//! `.truth.json` sidecar with the generator's embeddings and noise floor.
//!
//! ```text
//! cargo run --release --example gen_synthetic -- --op plus --out data/synth/plus.tsv
//! cargo run --release --example gen_synthetic -- --op max_multiply --depths 5 --out data/synth/t.csv
//! ```

use std::path::PathBuf;

use clap::Parser;
use sifrec::ops::Interaction;
use sifrec::run::{cmd_gen_synthetic, truth_path, SynthRequest};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "plus")]
    op: Interaction,
    #[arg(long, default_value_t = 2000)]
    rows: usize,
    #[arg(long, default_value_t = 1000)]
    cols: usize,
    /// Third mode; makes a tensor (needs a composite op).
    #[arg(long)]
    depths: Option<usize>,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 0.05)]
    density: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> sifrec::Result<()> {
    let a = Args::parse();
    let req = SynthRequest {
        op: a.op,
        rows: a.rows,
        cols: a.cols,
        depths: a.depths,
        dim: a.dim,
        density: a.density,
        noise: a.noise,
        seed: a.seed,
    };
    let truth = cmd_gen_synthetic(&req, &a.out)?;
    println!(
        "{} entries from {} (noise floor {:.4}) -> {} and {}",
        truth.config.nnz,
        a.op,
        truth.noise_rmse,
        a.out.display(),
        truth_path(&a.out).display()
    );
    Ok(())
}
