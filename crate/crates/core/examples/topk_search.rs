//! Keep the k strongest operations instead of one and compare test RMSE
//! across k.
//!
//! ```text
//! cargo run --release --example topk_search -- --data data/ml-100k/u.data --k 1,3,5
//! ```

use std::path::PathBuf;

use clap::Parser;
use sifrec::data::{load_matrix, split, MatrixFormat};
use sifrec::search::{sif_search_topk, SearchConfig};
use sifrec::train::TrainConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/ml-100k/u.data")]
    data: PathBuf,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    k: Vec<usize>,
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
        ..Default::default()
    };
    for k in a.k {
        let report = sif_search_topk(&ds, k, &cfg)?;
        let weights: Vec<String> = report.architecture.alpha.iter().map(|w| format!("{w:.3}")).collect();
        println!(
            "k={k} ops={} weights=[{}] test_rmse={:.4}",
            report.selected_names().join("+"),
            weights.join(" "),
            report.test_rmse().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
