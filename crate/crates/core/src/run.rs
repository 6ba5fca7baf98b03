//! Run directories and the command implementations behind the CLI.
//!
//! A run writes one directory:
//!
//! * `config.json`: the validated [`RunConfig`]
//! * `split.csv`: the split manifest (`record-index,split`)
//! * `metrics.csv`: per-epoch trace, see [`METRICS_HEADER`]
//! * `report.json`: a [`RunReport`]
//! * `model.json`: a [`ModelFile`]
//!
//! The output root is `--out`, else `$SIFREC_OUT`, else `runs/`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{
    load_matrix, load_tensor, split, write_matrix, write_tensor, Dims, MatrixFormat, RatingDataset, Reindex, Split,
};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{Architecture, Head, Matrix, ModelParams, PredictorMode};
use crate::ops::{Interaction, OpKind, TensorOp};
use crate::search::{
    random_search, sif_search_topk, ArchOptimizer, RetrainConfig, SearchConfig, SearchReport, TransformSpec,
};
use crate::synth::{generate, SynthConfig};
use crate::train::{evaluate, train_lambda_grid, EpochMetrics, TrainConfig, LAMBDA_GRID};
use crate::transform::Activation;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SIFREC_OUT";

pub const METRICS_HEADER: [&str; 7] = [
    "phase",
    "epoch",
    "seconds",
    "train_rmse",
    "valid_rmse",
    "test_rmse",
    "search_objective",
];

/// How to read the data file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Tensor when the file has a `# dims` header or comma-separated
    /// fields, otherwise a MovieLens-style matrix.
    #[default]
    Auto,
    Tab,
    Dcolon,
    Tensor,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(DataFormat::Auto),
            "tab" => Ok(DataFormat::Tab),
            "dcolon" => Ok(DataFormat::Dcolon),
            "tensor" => Ok(DataFormat::Tensor),
            other => Err(Error::Config(format!("unknown data format '{other}'"))),
        }
    }
}

pub fn load_data(path: &Path, format: DataFormat) -> Result<RatingDataset> {
    match format {
        DataFormat::Tab => load_matrix(path, MatrixFormat::Tab),
        DataFormat::Dcolon => load_matrix(path, MatrixFormat::DoubleColon),
        DataFormat::Tensor => load_tensor(path),
        DataFormat::Auto => {
            let text = fs::read_to_string(path)?;
            let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
            if first.starts_with("# dims") || (first.contains(',') && !first.contains("::")) {
                load_tensor(path)
            } else {
                load_matrix(path, MatrixFormat::detect(path)?)
            }
        }
    }
}

/// What a run does between splitting and evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Mode {
    Sif,
    SifTopk,
    Random,
    /// Train one operation with identity transforms.
    Fixed(Interaction),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Sif => f.write_str("sif"),
            Mode::SifTopk => f.write_str("sif-topk"),
            Mode::Random => f.write_str("random"),
            Mode::Fixed(op) => write!(f, "fixed:{op}"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sif" => Ok(Mode::Sif),
            "sif-topk" => Ok(Mode::SifTopk),
            "random" => Ok(Mode::Random),
            _ => match s.strip_prefix("fixed:") {
                Some(op) => Ok(Mode::Fixed(op.parse()?)),
                None => Err(Error::Config(format!(
                    "unknown mode '{s}' (sif, sif-topk, random, fixed:<op>)"
                ))),
            },
        }
    }
}

impl TryFrom<String> for Mode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Mode> for String {
    fn from(m: Mode) -> Self {
        m.to_string()
    }
}

/// Everything a run needs. Serialized verbatim into `config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: PathBuf,
    pub format: DataFormat,
    pub dim: usize,
    /// Candidate operations. Empty means the default set for the data
    /// order. On tensor data, pairwise names are expanded to all composites.
    pub ops: Vec<Interaction>,
    pub mode: Mode,
    /// Operations kept by `sif-topk`.
    pub topk: usize,
    /// Architectures sampled by `random`.
    pub budget: usize,
    pub predictor: PredictorMode,
    pub lr: f64,
    /// Regularization during search (and for random-search trials).
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub batch_size: usize,
    pub search_epochs: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub init_std: f64,
    pub hidden: usize,
    pub activation: Activation,
    pub elementwise: bool,
    pub arch_optimizer: ArchOptimizer,
    pub arch_lr: Option<f64>,
    pub lookahead: bool,
    pub relearn_transforms: bool,
    pub ratios: (f64, f64, f64),
    /// Reuse an existing split instead of drawing one.
    pub manifest: Option<PathBuf>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Run directory name; derived from mode, dim and seed when absent.
    pub name: Option<String>,
    /// Include embedding tables in `model.json`.
    pub save_embeddings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let search = SearchConfig::default();
        let train = TrainConfig::default();
        RunConfig {
            data: PathBuf::from("data/ml-100k/u.data"),
            format: DataFormat::Auto,
            dim: train.dim,
            ops: Vec::new(),
            mode: Mode::Sif,
            topk: 2,
            budget: 20,
            predictor: train.predictor,
            lr: train.lr,
            lambda: train.lambda,
            lambda_grid: LAMBDA_GRID.to_vec(),
            batch_size: train.batch_size,
            search_epochs: search.search_epochs,
            max_epochs: train.max_epochs,
            patience: train.patience,
            init_std: train.init_std,
            hidden: TransformSpec::default().hidden,
            activation: TransformSpec::default().activation,
            elementwise: search.elementwise,
            arch_optimizer: search.arch_optimizer,
            arch_lr: search.arch_lr,
            lookahead: search.lookahead,
            relearn_transforms: search.retrain.relearn_transforms,
            ratios: (0.5, 0.25, 0.25),
            manifest: None,
            seed: train.seed,
            out: None,
            name: None,
            save_embeddings: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            lr: self.lr,
            batch_size: self.batch_size,
            lambda: self.lambda,
            max_epochs: self.max_epochs,
            patience: self.patience,
            init_std: self.init_std,
            predictor: self.predictor,
            seed: self.seed,
        }
    }

    /// Candidate set for data of the given order.
    pub fn candidates(&self, order: usize) -> Result<Vec<Interaction>> {
        if order == 2 {
            if self.ops.is_empty() {
                return Ok(OpKind::DEFAULT_SEARCH.iter().map(|&o| o.into()).collect());
            }
            if let Some(op) = self.ops.iter().find(|o| o.arity() != 2) {
                return Err(Error::Config(format!("'{op}' needs third-order data")));
            }
            return Ok(self.ops.clone());
        }
        if self.ops.is_empty() {
            return SearchConfig::tensor_candidates(&OpKind::COMPOSABLE);
        }
        let (base, composite): (Vec<Interaction>, Vec<Interaction>) =
            self.ops.iter().partition(|o| matches!(o, Interaction::Pair(_)));
        let mut out = composite;
        let base: Vec<OpKind> = base
            .into_iter()
            .map(|o| match o {
                Interaction::Pair(k) => k,
                Interaction::Triple(_) => unreachable!(),
            })
            .collect();
        if !base.is_empty() {
            out.extend(SearchConfig::tensor_candidates(&base)?);
        }
        Ok(out)
    }

    pub fn search_config(&self, order: usize) -> Result<SearchConfig> {
        Ok(SearchConfig {
            train: self.train_config(),
            candidates: self.candidates(order)?,
            search_epochs: self.search_epochs,
            transforms: vec![TransformSpec {
                hidden: self.hidden,
                activation: self.activation,
            }],
            elementwise: self.elementwise,
            lookahead: self.lookahead,
            arch_optimizer: self.arch_optimizer,
            arch_lr: self.arch_lr,
            freeze_arch: false,
            initial_alpha: None,
            retrain: RetrainConfig {
                lambda_grid: self.lambda_grid.clone(),
                max_epochs: self.max_epochs,
                patience: self.patience,
                relearn_transforms: self.relearn_transforms,
            },
            skip_retrain: false,
        })
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("lambda grid must be non-empty and non-negative".into());
        }
        if self.search_epochs == 0 {
            return bad("search_epochs must be positive".into());
        }
        if self.hidden == 0 {
            return bad("transform hidden width must be positive".into());
        }
        if self.mode == Mode::SifTopk && self.topk == 0 {
            return bad("topk must be positive".into());
        }
        if self.mode == Mode::Random && self.budget == 0 {
            return bad("random search budget must be at least 1".into());
        }
        if let Some(lr) = self.arch_lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad("arch_lr must be positive".into());
            }
        }
        let (a, b, c) = self.ratios;
        if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(format!("{a}/{b}/{c}")));
        }
        if self.manifest.is_none() && b == 0.0 && self.mode != Mode::Random && !matches!(self.mode, Mode::Fixed(_)) {
            return bad("search needs a validation split".into());
        }
        if !self.data.exists() {
            return bad(format!("data file {} does not exist", self.data.display()));
        }
        Ok(())
    }

    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let mode = self.mode.to_string().replace(':', "-");
            format!("{mode}-d{}-seed{}", self.dim, self.seed)
        })
    }

    pub fn out_root(&self) -> PathBuf {
        out_root(self.out.as_deref())
    }
}

/// `explicit`, else `$SIFREC_OUT`, else `runs`.
pub fn out_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub path: PathBuf,
    pub dims: Dims,
    pub records: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    /// Raw user/item ids by dense index (matrix files only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Reindex>,
}

impl DatasetSummary {
    fn of(path: &Path, ds: &RatingDataset) -> Self {
        DatasetSummary {
            path: path.to_owned(),
            dims: ds.dims(),
            records: ds.len(),
            train: ds.split_len(Split::Train),
            validation: ds.split_len(Split::Validation),
            test: ds.split_len(Split::Test),
            ids: ds.reindex().cloned(),
        }
    }
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub dataset: DatasetSummary,
    /// Operation(s) of the final model.
    pub selected: Vec<Interaction>,
    /// Final model architecture: operations, weights, transforms.
    pub architecture: Architecture,
    /// Regularization weight picked on validation.
    pub lambda: f64,
    pub best_epoch: usize,
    pub validation: EvalReport,
    pub test: EvalReport,
    /// Search details (absent for fixed runs).
    pub search: Option<SearchReport>,
    pub seconds: f64,
}

/// Contents of `model.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub dims: Dims,
    pub dim: usize,
    pub architecture: Architecture,
    pub heads: Vec<Head>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<Vec<Matrix>>,
    /// Raw ids for the embedding rows (matrix files only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Reindex>,
}

impl ModelFile {
    pub fn new(params: &ModelParams, arch: &Architecture, ds: &RatingDataset, with_embeddings: bool) -> Self {
        ModelFile {
            dims: ds.dims(),
            ids: ds.reindex().cloned(),
            dim: params.dim,
            architecture: arch.clone(),
            heads: params.heads.clone(),
            embeddings: with_embeddings.then(|| params.tables.clone()),
        }
    }

    /// Parameters for prediction; needs the embeddings.
    pub fn params(&self) -> Result<ModelParams> {
        let tables = self
            .embeddings
            .clone()
            .ok_or_else(|| Error::Config("model file has no embeddings (rerun with --save-embeddings)".into()))?;
        let params = ModelParams {
            dim: self.dim,
            tables,
            heads: self.heads.clone(),
        };
        self.architecture.validate(&params)?;
        Ok(params)
    }
}

/// A finished run.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: RunReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_metrics(path: &Path, phases: &[(&str, &[EpochMetrics])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for (phase, rows) in phases {
        for m in *rows {
            w.write_record([
                phase.to_string(),
                m.epoch.to_string(),
                format!("{:.3}", m.seconds),
                m.train_rmse.to_string(),
                m.valid_rmse.to_string(),
                m.test_rmse.to_string(),
                m.search_objective.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads and splits the data as configured.
pub fn prepare_data(cfg: &RunConfig) -> Result<RatingDataset> {
    let ds = load_data(&cfg.data, cfg.format)?;
    match &cfg.manifest {
        Some(m) => ds.apply_manifest(m),
        None => split(&ds, cfg.ratios, cfg.seed),
    }
}

/// The model-producing part of a run, without touching the filesystem.
pub struct Fitted {
    pub report: RunReport,
    pub params: ModelParams,
    /// `(phase, rows)` for `metrics.csv`.
    pub history: Vec<(&'static str, Vec<EpochMetrics>)>,
}

/// Runs the configured search (or fixed training) on an already split dataset.
pub fn fit(cfg: &RunConfig, ds: &RatingDataset) -> Result<Fitted> {
    let start = Instant::now();
    let order = ds.dims().order();
    let (arch, params, lambda, best_epoch, search, history) = match cfg.mode {
        Mode::Fixed(op) => {
            if op.arity() != order {
                return Err(Error::Config(format!("'{op}' does not fit order-{order} data")));
            }
            let arch = Architecture::single(op);
            let (lambda, out) = train_lambda_grid(ds, &arch, &cfg.train_config(), &cfg.lambda_grid)?;
            let history = vec![("train", out.history)];
            (arch, out.params, lambda, out.best_epoch, None, history)
        }
        mode => {
            let scfg = cfg.search_config(order)?;
            let mut report = match mode {
                Mode::Sif => sif_search_topk(ds, 1, &scfg)?,
                Mode::SifTopk => sif_search_topk(ds, cfg.topk, &scfg)?,
                Mode::Random => random_search(ds, cfg.budget, &scfg)?,
                Mode::Fixed(_) => unreachable!(),
            };
            let params = report.model.take().expect("search retrains by default");
            let retrain = report.retrain.as_ref().expect("search retrains by default");
            let history = vec![
                ("search", report.search_history.clone()),
                ("retrain", retrain.history.clone()),
            ];
            let (lambda, best) = (retrain.lambda, retrain.best_epoch);
            (report.architecture.clone(), params, lambda, best, Some(report), history)
        }
    };
    let validation = evaluate(&params, &arch, ds, Split::Validation)?;
    let test = evaluate(&params, &arch, ds, Split::Test)?;
    let report = RunReport {
        mode: cfg.mode,
        seed: cfg.seed,
        dataset: DatasetSummary::of(&cfg.data, ds),
        selected: arch.ops.clone(),
        architecture: arch,
        lambda,
        best_epoch,
        validation,
        test,
        search,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(Fitted { report, params, history })
}

/// `search`: split, search (or train), retrain over the lambda grid,
/// evaluate, and write the run directory.
pub fn cmd_search(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let ds = prepare_data(cfg)?;
    let dir = cfg.out_root().join(cfg.run_name());
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    ds.write_manifest(&dir.join("split.csv"))?;

    let fitted = fit(cfg, &ds)?;
    let phases: Vec<(&str, &[EpochMetrics])> = fitted.history.iter().map(|(p, h)| (*p, h.as_slice())).collect();
    write_metrics(&dir.join("metrics.csv"), &phases)?;
    write_json(&dir.join("report.json"), &fitted.report)?;
    let model = ModelFile::new(&fitted.params, &fitted.report.architecture, &ds, cfg.save_embeddings);
    write_json(&dir.join("model.json"), &model)?;
    Ok(RunOutcome {
        dir,
        report: fitted.report,
    })
}

/// `evaluate`: scores a saved model on one split. The split manifest
/// defaults to `split.csv` next to the model file.
pub fn cmd_evaluate(
    model_path: &Path,
    data: &Path,
    format: DataFormat,
    split: Split,
    manifest: Option<&Path>,
) -> Result<EvalReport> {
    let model: ModelFile = serde_json::from_str(&fs::read_to_string(model_path)?)?;
    let params = model.params()?;
    let ds = load_data(data, format)?;
    if ds.dims() != model.dims {
        return Err(Error::Config(format!(
            "data dims {:?} differ from the model's {:?}",
            ds.dims(),
            model.dims
        )));
    }
    let default_manifest = model_path.with_file_name("split.csv");
    let manifest = manifest.map(Path::to_path_buf).or_else(|| default_manifest.exists().then_some(default_manifest));
    let ds = match manifest {
        Some(m) => ds.apply_manifest(&m)?,
        None if split == Split::Train => ds,
        None => return Err(Error::Config("no split manifest found; pass --manifest".into())),
    };
    evaluate(&params, &model.architecture, &ds, split)
}

/// Axis swept by `ablate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Transform width and activation.
    ElementMlp,
    /// Linear versus MLP predictor heads.
    Predictor,
    /// Number of kept operations.
    Topk,
    /// Every candidate operation trained on its own.
    SingleOps,
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::ElementMlp => "element-mlp",
            Ablation::Predictor => "predictor",
            Ablation::Topk => "topk",
            Ablation::SingleOps => "single-ops",
        })
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "element-mlp" => Ok(Ablation::ElementMlp),
            "predictor" => Ok(Ablation::Predictor),
            "topk" => Ok(Ablation::Topk),
            "single-ops" => Ok(Ablation::SingleOps),
            other => Err(Error::Config(format!("unknown ablation '{other}'"))),
        }
    }
}

pub const ELEMENT_MLP_HIDDEN: [usize; 5] = [1, 5, 10, 15, 20];
pub const TOPK_RANGE: [usize; 5] = [1, 2, 3, 4, 5];

/// One run of an ablation sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub seed: u64,
    pub selected: String,
    pub lambda: f64,
    pub valid_rmse: f64,
    pub test_rmse: f64,
    #[serde(rename = "hit@5")]
    pub hit5: Option<f64>,
    #[serde(rename = "ndcg@5")]
    pub ndcg5: Option<f64>,
    pub seconds: f64,
}

/// Mean over seeds for one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub setting: String,
    pub runs: usize,
    pub mean_test_rmse: f64,
    pub std_test_rmse: f64,
    #[serde(rename = "mean_hit@5")]
    pub mean_hit5: Option<f64>,
    #[serde(rename = "mean_ndcg@5")]
    pub mean_ndcg5: Option<f64>,
}

/// The settings an ablation sweeps, as `(label, config)` pairs.
pub fn ablation_settings(base: &RunConfig, axis: Ablation, order: usize) -> Result<Vec<(String, RunConfig)>> {
    let mut out = Vec::new();
    match axis {
        Ablation::ElementMlp => {
            for act in Activation::ALL {
                for h in ELEMENT_MLP_HIDDEN {
                    let c = RunConfig {
                        mode: Mode::Sif,
                        hidden: h,
                        activation: act,
                        elementwise: true,
                        ..base.clone()
                    };
                    out.push((format!("{act}/h{h}"), c));
                }
            }
        }
        Ablation::Predictor => {
            for p in [PredictorMode::Linear, PredictorMode::Mlp] {
                let c = RunConfig {
                    mode: Mode::Sif,
                    predictor: p,
                    ..base.clone()
                };
                out.push((p.to_string(), c));
            }
        }
        Ablation::Topk => {
            let d = base.candidates(order)?.len();
            for k in TOPK_RANGE.into_iter().filter(|k| *k <= d) {
                let c = RunConfig {
                    mode: Mode::SifTopk,
                    topk: k,
                    ..base.clone()
                };
                out.push((format!("k{k}"), c));
            }
        }
        Ablation::SingleOps => {
            for op in base.candidates(order)? {
                let c = RunConfig {
                    mode: Mode::Fixed(op),
                    ..base.clone()
                };
                out.push((op.to_string(), c));
            }
        }
    }
    Ok(out)
}

pub fn summarize(rows: &[AblationRow]) -> Vec<AblationSummary> {
    let mut settings: Vec<&str> = Vec::new();
    for r in rows {
        if !settings.contains(&r.setting.as_str()) {
            settings.push(&r.setting);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    settings
        .into_iter()
        .map(|s| {
            let group: Vec<&AblationRow> = rows.iter().filter(|r| r.setting == s).collect();
            let rmse: Vec<f64> = group.iter().map(|r| r.test_rmse).collect();
            let m = mean(&rmse);
            let var = rmse.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / rmse.len() as f64;
            let opt_mean = |f: fn(&AblationRow) -> Option<f64>| {
                let v: Option<Vec<f64>> = group.iter().map(|r| f(r)).collect();
                v.map(|v| mean(&v))
            };
            AblationSummary {
                setting: s.to_owned(),
                runs: group.len(),
                mean_test_rmse: m,
                std_test_rmse: var.sqrt(),
                mean_hit5: opt_mean(|r| r.hit5),
                mean_ndcg5: opt_mean(|r| r.ndcg5),
            }
        })
        .collect()
}

/// Result of an ablation sweep.
#[derive(Debug)]
pub struct AblationOutcome {
    pub dir: PathBuf,
    pub rows: Vec<AblationRow>,
    pub summary: Vec<AblationSummary>,
}

/// `ablate`: runs every setting of `axis` once per seed and writes
/// `runs.csv` (one row per run) and `table.csv` (mean over seeds).
pub fn cmd_ablate(base: &RunConfig, axis: Ablation, seeds: &[u64]) -> Result<AblationOutcome> {
    base.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let dir = base
        .out_root()
        .join(base.name.clone().unwrap_or_else(|| format!("ablate-{axis}-d{}", base.dim)));
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), base)?;
    let data = load_data(&base.data, base.format)?;
    let settings = ablation_settings(base, axis, data.dims().order())?;

    let mut rows = Vec::new();
    for &seed in seeds {
        let ds = match &base.manifest {
            Some(m) => data.clone().apply_manifest(m)?,
            None => split(&data, base.ratios, seed)?,
        };
        for (label, c) in &settings {
            let c = RunConfig { seed, ..c.clone() };
            c.validate()?;
            let r = fit(&c, &ds)?.report;
            rows.push(AblationRow {
                setting: label.clone(),
                seed,
                selected: r.selected.iter().map(ToString::to_string).collect::<Vec<_>>().join("+"),
                lambda: r.lambda,
                valid_rmse: r.validation.rmse,
                test_rmse: r.test.rmse,
                hit5: r.test.hit(5),
                ndcg5: r.test.ndcg(5),
                seconds: r.seconds,
            });
        }
    }
    let summary = summarize(&rows);
    let mut w = csv::Writer::from_path(dir.join("runs.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("table.csv"))?;
    for s in &summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(AblationOutcome { dir, rows, summary })
}

/// Settings for `gen-synthetic`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthRequest {
    pub op: Interaction,
    pub rows: usize,
    pub cols: usize,
    /// Third-mode size; required for composite generators.
    pub depths: Option<usize>,
    pub dim: usize,
    /// Fraction of cells observed.
    pub density: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SynthRequest {
    pub fn config(&self) -> Result<SynthConfig> {
        let dims = match (self.op, self.depths) {
            (Interaction::Pair(_), None) => Dims::matrix(self.rows, self.cols),
            (Interaction::Triple(_), Some(d)) => Dims::tensor(self.rows, self.cols, d),
            (Interaction::Pair(_), Some(_)) => {
                return Err(Error::Config("tensor data needs a composite generator such as max_multiply".into()))
            }
            (Interaction::Triple(_), None) => return Err(Error::Config("composite generators need --depths".into())),
        };
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Config("density must be in (0, 1]".into()));
        }
        let cells: usize = dims.mode_sizes().iter().product();
        Ok(SynthConfig {
            op: self.op,
            dims,
            dim: self.dim,
            nnz: ((cells as f64 * self.density).round() as usize).max(1),
            noise: self.noise,
            seed: self.seed,
        })
    }
}

/// Path of the ground-truth sidecar for a generated data file.
pub fn truth_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().unwrap_or_default().to_os_string();
    name.push(".truth.json");
    data.with_file_name(name)
}

/// `gen-synthetic`: writes the data file and a `<file>.truth.json` sidecar.
/// Matrices use 1-based tab-separated ids; tensors use `row,col,depth,value`
/// with a dims header.
pub fn cmd_gen_synthetic(req: &SynthRequest, out: &Path) -> Result<crate::synth::GroundTruth> {
    let cfg = req.config()?;
    let (ds, truth) = generate(&cfg)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    match cfg.dims.order() {
        2 => write_matrix(&ds, out)?,
        _ => write_tensor(&ds, out)?,
    }
    write_json(&truth_path(out), &truth)?;
    Ok(truth)
}

/// Default composite for tensor examples.
pub fn default_composite() -> Interaction {
    Interaction::Triple(TensorOp::new(OpKind::Max, OpKind::Multiply).expect("composable"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_round_trip() {
        for s in ["sif", "sif-topk", "random", "fixed:inner", "fixed:max_multiply"] {
            assert_eq!(s.parse::<Mode>().unwrap().to_string(), s);
        }
        assert!("fixed:nope".parse::<Mode>().is_err());
        assert!("grid".parse::<Mode>().is_err());
    }

    #[test]
    fn tensor_candidates_expand_pairwise_names() {
        let cfg = RunConfig {
            ops: vec![OpKind::Plus.into(), OpKind::Max.into()],
            ..Default::default()
        };
        let c = cfg.candidates(3).unwrap();
        assert_eq!(c.len(), 4);
        assert!(cfg.candidates(2).unwrap().len() == 2);
        let bad = RunConfig {
            ops: vec![default_composite()],
            ..Default::default()
        };
        assert!(bad.candidates(2).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig {
            mode: Mode::Fixed(OpKind::Inner.into()),
            arch_lr: Some(0.01),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        // missing fields fall back to defaults
        let partial: RunConfig = serde_json::from_str(r#"{"dim": 4}"#).unwrap();
        assert_eq!(partial.dim, 4);
        assert_eq!(partial.lambda_grid, LAMBDA_GRID.to_vec());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.tsv");
        fs::write(&data, "1\t1\t5\n").unwrap();
        let ok = RunConfig {
            data: data.clone(),
            ..Default::default()
        };
        ok.validate().unwrap();
        for bad in [
            RunConfig { dim: 0, ..ok.clone() },
            RunConfig { lr: -1.0, ..ok.clone() },
            RunConfig {
                lambda_grid: vec![],
                ..ok.clone()
            },
            RunConfig {
                ratios: (0.5, 0.5, 0.5),
                ..ok.clone()
            },
            RunConfig {
                data: dir.path().join("missing"),
                ..ok.clone()
            },
        ] {
            assert_eq!(bad.validate().unwrap_err().exit_code(), 1);
        }
    }
}
