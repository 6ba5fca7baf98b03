//! Search for an interaction function on a rating file, retrain the winner
//! and report its test metrics.
//!
//! ```text
//! cargo run --release --example sif_search -- --data data/ml-100k/u.data --dim 8
//! cargo run --release --example sif_search -- --candidates inner,plus --search-only
//! ```

use std::path::PathBuf;

use clap::Parser;
use sifrec::data::{load_matrix, split, MatrixFormat};
use sifrec::ops::Interaction;
use sifrec::search::{sif_search_topk, ArchOptimizer, SearchConfig};
use sifrec::train::TrainConfig;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/ml-100k/u.data")]
    data: PathBuf,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated candidate operations.
    #[arg(long, value_delimiter = ',')]
    candidates: Vec<Interaction>,
    /// Number of operations to keep.
    #[arg(long, default_value_t = 1)]
    topk: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long)]
    arch_optimizer: Option<ArchOptimizer>,
    #[arg(long)]
    arch_lr: Option<f64>,
    #[arg(long)]
    no_elementwise: bool,
    #[arg(long)]
    search_only: bool,
}

fn main() -> sifrec::Result<()> {
    let args = Args::parse();
    let ds = load_matrix(&args.data, MatrixFormat::detect(&args.data)?)?;
    let ds = split(&ds, (0.5, 0.25, 0.25), args.seed)?;
    let mut cfg = SearchConfig {
        train: TrainConfig {
            dim: args.dim,
            seed: args.seed,
            ..Default::default()
        },
        search_epochs: args.epochs,
        elementwise: !args.no_elementwise,
        arch_lr: args.arch_lr,
        skip_retrain: args.search_only,
        ..Default::default()
    };
    if !args.candidates.is_empty() {
        cfg.candidates = args.candidates;
    }
    if let Some(o) = args.arch_optimizer {
        cfg.arch_optimizer = o;
    }
    let report = sif_search_topk(&ds, args.topk, &cfg)?;

    for (m, alpha) in report.search_history.iter().zip(&report.alpha_history) {
        let alpha: Vec<String> = alpha.iter().map(|a| format!("{a:.3}")).collect();
        println!(
            "search epoch {:3}  {:7.2}s  H {:.4}  train {:.4}  valid {:.4}  alpha [{}]",
            m.epoch,
            m.seconds,
            m.search_objective.unwrap_or(f64::NAN),
            m.train_rmse,
            m.valid_rmse,
            alpha.join(" ")
        );
    }
    let Some(r) = report.retrain.as_ref() else {
        println!("selected={}", report.selected_names().join("+"));
        return Ok(());
    };
    println!(
        "selected={} lambda={:e} search={:.1}s retrain={:.1}s test_rmse={:.4} hit@5={:.4} ndcg@5={:.4}",
        report.selected_names().join("+"),
        r.lambda,
        report.search_seconds,
        r.seconds,
        r.test.rmse,
        r.test.hit(5).unwrap_or(f64::NAN),
        r.test.ndcg(5).unwrap_or(f64::NAN)
    );
    Ok(())
}
