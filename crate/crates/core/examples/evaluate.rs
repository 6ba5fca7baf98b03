//! Run a full search into a run directory, then reload the saved model and
//! score it on every split.
//!
//! ```text
//! cargo run --release --example evaluate -- --data data/ml-100k/u.data --mode fixed:inner
//! ```

use std::path::PathBuf;

use clap::Parser;
use sifrec::data::Split;
use sifrec::metrics::EvalReport;
use sifrec::run::{cmd_evaluate, cmd_search, Mode, RunConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/ml-100k/u.data")]
    data: PathBuf,
    #[arg(long, default_value = "fixed:inner")]
    mode: Mode,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn main() -> sifrec::Result<()> {
    let a = Args::parse();
    let cfg = RunConfig {
        data: a.data.clone(),
        mode: a.mode,
        dim: a.dim,
        out: Some(a.out),
        save_embeddings: true,
        ..Default::default()
    };
    let run = cmd_search(&cfg)?;
    println!("run directory {}", run.dir.display());
    println!("{}", EvalReport::CSV_HEADER);
    for split in [Split::Train, Split::Validation, Split::Test] {
        let report = cmd_evaluate(&run.dir.join("model.json"), &a.data, cfg.format, split, None)?;
        println!("{}", report.csv_row());
    }
    Ok(())
}
