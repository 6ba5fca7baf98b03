use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sifrec::data::Split;
use sifrec::model::PredictorMode;
use sifrec::ops::Interaction;
use sifrec::run::{self, Ablation, DataFormat, Mode, RunConfig, SynthRequest};
use sifrec::search::ArchOptimizer;
use sifrec::transform::Activation;

#[derive(Parser)]
#[command(name = "sifrec", version, about = "Search interaction functions for collaborative filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split, search (or train a fixed op), retrain over the lambda grid, evaluate.
    Search(RunArgs),
    /// Score a saved model on one split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "auto")]
        format: DataFormat,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Split manifest; defaults to split.csv next to the model.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Sweep one axis over several seeds and tabulate the results.
    Ablate {
        /// element-mlp, predictor, topk or single-ops.
        #[arg(long)]
        ablation: Ablation,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Repeat the sweep at each embedding size (overrides --dim).
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a dataset generated by a known interaction function.
    GenSynthetic {
        /// matrix or tensor.
        #[arg(long, default_value = "matrix")]
        kind: String,
        /// Generating operation; a composite such as max_multiply for tensors.
        #[arg(long)]
        op: Interaction,
        /// Mode sizes, e.g. 2000,1000 or 600,1434,5.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Embedding size of the generator.
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
    },
}

/// Flags shared by `search` and `ablate`. Unset flags keep the value from
/// `--config` (or the built-in default).
#[derive(Args)]
struct RunArgs {
    /// JSON run config to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    format: Option<DataFormat>,
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated candidate operations.
    #[arg(long, value_delimiter = ',')]
    ops: Option<Vec<Interaction>>,
    /// sif, sif-topk, random or fixed:<op>.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    predictor: Option<PredictorMode>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    search_epochs: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Hidden units of the element-wise transform.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    activation: Option<Activation>,
    /// Search without element-wise transforms.
    #[arg(long)]
    no_elementwise: bool,
    #[arg(long)]
    arch_optimizer: Option<ArchOptimizer>,
    #[arg(long)]
    arch_lr: Option<f64>,
    /// Use the one-step look-ahead for the architecture gradient.
    #[arg(long)]
    lookahead: bool,
    /// Keep training the transforms during retraining.
    #[arg(long)]
    relearn_transforms: bool,
    /// Train/validation/test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (default: $SIFREC_OUT, else runs/).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run directory name.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    save_embeddings: bool,
}

impl RunArgs {
    fn into_config(self) -> sifrec::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { c.$field = v; }
            )*};
        }
        set!(data, format, dim, ops, mode, topk, budget, predictor, lr, lambda, lambda_grid);
        set!(batch_size, search_epochs, max_epochs, patience, hidden, activation, arch_optimizer, seed);
        if self.arch_lr.is_some() {
            c.arch_lr = self.arch_lr;
        }
        if let Some(r) = self.ratios {
            c.ratios = (r[0], r[1], r[2]);
        }
        if self.manifest.is_some() {
            c.manifest = self.manifest;
        }
        if self.out.is_some() {
            c.out = self.out;
        }
        if self.name.is_some() {
            c.name = self.name;
        }
        c.elementwise &= !self.no_elementwise;
        c.lookahead |= self.lookahead;
        c.relearn_transforms |= self.relearn_transforms;
        c.save_embeddings |= self.save_embeddings;
        Ok(c)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

fn execute(cmd: Command) -> sifrec::Result<()> {
    match cmd {
        Command::Search(args) => {
            let out = run::cmd_search(&args.into_config()?)?;
            let r = &out.report;
            let selected: Vec<String> = r.selected.iter().map(ToString::to_string).collect();
            println!(
                "selected {}  lambda {:e}  test rmse {:.4}  hit@5 {}  ndcg@5 {}  ({:.1}s)",
                selected.join("+"),
                r.lambda,
                r.test.rmse,
                fmt_opt(r.test.hit(5)),
                fmt_opt(r.test.ndcg(5)),
                r.seconds
            );
            println!("{}", out.dir.display());
        }
        Command::Evaluate {
            model,
            data,
            format,
            split,
            manifest,
        } => {
            let report = run::cmd_evaluate(&model, &data, format, split, manifest.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Ablate {
            ablation,
            seeds,
            dims,
            run: args,
        } => {
            let base = args.into_config()?;
            let dims = if dims.is_empty() { vec![base.dim] } else { dims };
            for dim in dims {
                let cfg = RunConfig {
                    dim,
                    name: base.name.as_ref().map(|n| format!("{n}-d{dim}")),
                    ..base.clone()
                };
                let out = run::cmd_ablate(&cfg, ablation, &seeds)?;
                println!("dim {dim}: {}", out.dir.display());
                for s in &out.summary {
                    println!(
                        "  {:<16} rmse {:.4} ± {:.4}  hit@5 {}  ndcg@5 {}",
                        s.setting,
                        s.mean_test_rmse,
                        s.std_test_rmse,
                        fmt_opt(s.mean_hit5),
                        fmt_opt(s.mean_ndcg5)
                    );
                }
            }
        }
        Command::GenSynthetic {
            kind,
            op,
            dims,
            dim,
            density,
            noise,
            seed,
            out,
        } => {
            let (rows, cols, depths) = match (kind.as_str(), dims.as_slice()) {
                ("matrix", &[r, c]) => (r, c, None),
                ("tensor", &[r, c, d]) => (r, c, Some(d)),
                _ => {
                    return Err(sifrec::Error::Config(format!(
                        "kind '{kind}' needs {} --dims values",
                        if kind == "tensor" { "three" } else { "two (matrix)" }
                    )))
                }
            };
            let req = SynthRequest {
                op,
                rows,
                cols,
                depths,
                dim,
                density,
                noise,
                seed,
            };
            let truth = run::cmd_gen_synthetic(&req, &out)?;
            println!(
                "wrote {} ({} entries, noise floor {:.4})",
                out.display(),
                truth.config.nnz,
                truth.noise_rmse
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors count as bad configuration (exit 1), not clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
