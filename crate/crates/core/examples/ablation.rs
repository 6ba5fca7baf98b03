//! Sweep one ablation axis (element-mlp, predictor, topk, single-ops) over
//! a few seeds and print the summary table.
//!
//! ```text
//! cargo run --release --example ablation -- --axis single-ops --seeds 1,2,3
//! ```

use std::path::PathBuf;

use clap::Parser;
use sifrec::run::{cmd_ablate, Ablation, RunConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/ml-100k/u.data")]
    data: PathBuf,
    #[arg(long, default_value = "single-ops")]
    axis: Ablation,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn main() -> sifrec::Result<()> {
    let a = Args::parse();
    let cfg = RunConfig {
        data: a.data,
        dim: a.dim,
        out: Some(a.out),
        ..Default::default()
    };
    let out = cmd_ablate(&cfg, a.axis, &a.seeds)?;
    println!("{:<16} {:>6} {:>8} {:>8} {:>8} {:>8}", "setting", "runs", "rmse", "std", "hit@5", "ndcg@5");
    for s in &out.summary {
        println!(
            "{:<16} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            s.setting,
            s.runs,
            s.mean_test_rmse,
            s.std_test_rmse,
            s.mean_hit5.unwrap_or(f64::NAN),
            s.mean_ndcg5.unwrap_or(f64::NAN)
        );
    }
    println!("tables in {}", out.dir.display());
    Ok(())
}
