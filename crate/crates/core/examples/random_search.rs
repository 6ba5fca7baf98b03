//! Random search baseline: sample operations and transform weights
//! uniformly, train each, keep the best on validation.
//!
//! ```text
//! cargo run --release --example random_search -- --data data/ml-100k/u.data --budget 10
//! ```

use std::path::PathBuf;

use clap::Parser;
use sifrec::data::{load_matrix, split, MatrixFormat};
use sifrec::search::{random_search, SearchConfig};
use sifrec::train::TrainConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/ml-100k/u.data")]
    data: PathBuf,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    budget: usize,
    /// Epochs per sampled architecture.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> sifrec::Result<()> {
    let a = Args::parse();
    let ds = load_matrix(&a.data, MatrixFormat::detect(&a.data)?)?;
    let ds = split(&ds, (0.5, 0.25, 0.25), a.seed)?;
    let cfg = SearchConfig {
        train: TrainConfig {
            dim: a.dim,
            seed: a.seed,
            ..Default::default()
        },
        search_epochs: a.epochs,
        ..Default::default()
    };
    let report = random_search(&ds, a.budget, &cfg)?;
    for m in &report.search_history {
        println!("trial {:3}  {:7.1}s  valid {:.4}", m.epoch, m.seconds, m.valid_rmse);
    }
    let r = report.retrain.as_ref().expect("retrained");
    println!(
        "best={} lambda={:e} test_rmse={:.4} hit@5={:.4} ndcg@5={:.4}",
        report.selected_names().join("+"),
        r.lambda,
        r.test.rmse,
        r.test.hit(5).unwrap_or(f64::NAN),
        r.test.ndcg(5).unwrap_or(f64::NAN)
    );
    Ok(())
}
