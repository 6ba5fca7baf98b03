//! Third-order search: generate a tensor from a known composite operation
//! and search over all composites of the base operations.
//!
//! ```text
//! cargo run --release --example tensor_search -- --op max_multiply --seeds 3
//! ```

use clap::Parser;
use sifrec::data::{split, Dims};
use sifrec::ops::{Interaction, OpKind};
use sifrec::search::{sif_search, SearchConfig};
use sifrec::synth::{generate, SynthConfig};
use sifrec::train::TrainConfig;

#[derive(Parser)]
struct Args {
    /// Generating composite, `<inner>_<outer>`.
    #[arg(long, default_value = "max_multiply")]
    op: Interaction,
    #[arg(long, value_delimiter = ',', default_value = "600,1434,5")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 10000)]
    nnz: usize,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long)]
    no_elementwise: bool,
}

fn main() -> sifrec::Result<()> {
    let a = Args::parse();
    let candidates = SearchConfig::tensor_candidates(&OpKind::COMPOSABLE)?;
    println!("{} candidates: {:?}", candidates.len(), candidates.iter().map(ToString::to_string).collect::<Vec<_>>());
    let mut hits = 0;
    for seed in 1..=a.seeds {
        let (ds, truth) = generate(&SynthConfig {
            op: a.op,
            dims: Dims::tensor(a.dims[0], a.dims[1], a.dims[2]),
            dim: a.dim,
            nnz: a.nnz,
            noise: 0.1,
            seed,
        })?;
        let ds = split(&ds, (0.5, 0.25, 0.25), seed)?;
        let cfg = SearchConfig {
            train: TrainConfig {
                dim: a.dim,
                seed,
                ..Default::default()
            },
            candidates: candidates.clone(),
            elementwise: !a.no_elementwise,
            skip_retrain: true,
            ..Default::default()
        };
        let report = sif_search(&ds, &cfg)?;
        let alpha: Vec<String> = report.alpha.iter().map(|a| format!("{a:.2}")).collect();
        println!(
            "seed {seed}: picked {} valid {:.4} (noise {:.4}) alpha [{}]",
            report.selected_names().join("+"),
            report.search_history.last().map_or(f64::NAN, |m| m.valid_rmse),
            truth.noise_rmse,
            alpha.join(" ")
        );
        hits += usize::from(report.selected == [a.op]);
    }
    println!("{}: recovered in {hits}/{} seeds", a.op, a.seeds);
    Ok(())
}
