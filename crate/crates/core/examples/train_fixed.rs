//! Train one fixed interaction function on a MovieLens-style file and print
//! the per-epoch RMSE trace.
//!
//! ```text
//! cargo run --release --example train_fixed -- data/ml-100k/u.data inner 8
//! ```

use std::path::PathBuf;

use sifrec::data::{load_matrix, split, MatrixFormat, Split};
use sifrec::model::Architecture;
use sifrec::ops::Interaction;
use sifrec::train::{evaluate, train_lambda_grid, TrainConfig, LAMBDA_GRID};

fn main() -> sifrec::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "data/ml-100k/u.data".into()));
    let op: Interaction = args.next().unwrap_or_else(|| "inner".into()).parse()?;
    let dim: usize = args.next().map(|s| s.parse().expect("dim")).unwrap_or(8);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);

    let ds = load_matrix(&path, MatrixFormat::detect(&path)?)?;
    let ds = split(&ds, (0.5, 0.25, 0.25), seed)?;
    let arch = Architecture::single(op);
    let cfg = TrainConfig {
        dim,
        seed,
        ..Default::default()
    };
    let (lambda, out) = train_lambda_grid(&ds, &arch, &cfg, &LAMBDA_GRID)?;
    for m in &out.history {
        println!(
            "epoch {:3}  {:7.2}s  train {:.4}  valid {:.4}  test {:.4}",
            m.epoch, m.seconds, m.train_rmse, m.valid_rmse, m.test_rmse
        );
    }
    let report = evaluate(&out.params, &arch, &ds, Split::Test)?;
    println!(
        "op={op} dim={dim} lambda={lambda:e} best_epoch={} test_rmse={:.4} hit@5={:.4} ndcg@5={:.4}",
        out.best_epoch,
        report.rmse,
        report.hit(5).unwrap_or(f64::NAN),
        report.ndcg(5).unwrap_or(f64::NAN)
    );
    Ok(())
}
