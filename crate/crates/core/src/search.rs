//! One-shot search over interaction functions.
//!
//! [`sif_search`] alternates two updates per step:
//!
//! 1. on a validation batch, a proximal gradient step on the mixture
//!    weights `alpha` (evaluated at their sparsified view) followed by
//!    projected gradient steps on the element-wise transforms;
//! 2. on a training batch, an Adagrad step on embeddings and heads with the
//!    sparsified `alpha`.
//!
//! The surviving operation(s) are then retrained from scratch with the
//! learned transforms frozen, grid-searching the regularization weight.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Batch, BatchSampler, RatingDataset, Split};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model::{derive_seed, Architecture, Evaluator, ModelParams};
use crate::ops::{enumerate_tensor_ops, Interaction, OpKind};
use crate::prox::{prox_c1, prox_c2, prox_ck, top_k_support};
use crate::train::{
    epoch_metrics, evaluate, Adagrad, train_fixed, train_lambda_grid, EpochMetrics, TrainConfig, TrainOutcome, Trainer,
    LAMBDA_GRID,
};
use crate::transform::{Activation, TransformWeights};

/// Shape of one element-wise transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub hidden: usize,
    pub activation: Activation,
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec {
            hidden: 5,
            activation: Activation::Sigmoid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrainConfig {
    pub lambda_grid: Vec<f64>,
    pub max_epochs: usize,
    pub patience: usize,
    /// Keep learning the transforms during retraining instead of freezing them.
    pub relearn_transforms: bool,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        RetrainConfig {
            lambda_grid: LAMBDA_GRID.to_vec(),
            max_epochs: 200,
            patience: 10,
            relearn_transforms: false,
        }
    }
}

/// Step rule for the architecture updates (alpha and transforms), applied
/// before the proximal step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchOptimizer {
    /// `x - lr * g`.
    #[default]
    Sgd,
    /// Per-coordinate Adagrad scaling, as for the training parameters.
    Adagrad,
}

impl std::str::FromStr for ArchOptimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(ArchOptimizer::Sgd),
            "adagrad" => Ok(ArchOptimizer::Adagrad),
            other => Err(Error::Config(format!("unknown architecture optimizer '{other}'"))),
        }
    }
}

/// Accumulators for the architecture updates.
struct ArchStep {
    kind: ArchOptimizer,
    lr: f64,
    alpha: Vec<f64>,
    transforms: Vec<Vec<f64>>,
}

impl ArchStep {
    fn new(kind: ArchOptimizer, lr: f64, arch: &Architecture) -> Self {
        ArchStep {
            kind,
            lr,
            alpha: vec![0.0; arch.alpha.len()],
            transforms: arch
                .transforms
                .iter()
                .map(|t| vec![0.0; t.as_ref().map_or(0, |t| t.params().len())])
                .collect(),
        }
    }

    fn apply(kind: ArchOptimizer, lr: f64, x: &mut [f64], g: &[f64], acc: &mut [f64]) {
        match kind {
            ArchOptimizer::Sgd => {
                for (x, g) in x.iter_mut().zip(g) {
                    *x -= lr * g;
                }
            }
            ArchOptimizer::Adagrad => Adagrad::update(x, g, acc, lr, Adagrad::EPS),
        }
    }

    /// `alpha <- prox_c2(alpha - step)`.
    fn alpha(&mut self, alpha: &mut Vec<f64>, g: &[f64]) {
        Self::apply(self.kind, self.lr, alpha, g, &mut self.alpha);
        *alpha = prox_c2(alpha);
    }

    /// Step on each present transform, then projection onto the unit ball.
    fn transforms(&mut self, arch: &mut Architecture, grads: &[Option<Vec<f64>>]) {
        for ((t, g), acc) in arch.transforms.iter_mut().zip(grads).zip(&mut self.transforms) {
            if let (Some(t), Some(g)) = (t.as_mut(), g) {
                Self::apply(self.kind, self.lr, t.params_mut(), g, acc);
                t.project();
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Shared optimizer and model settings. `train.lambda` applies during
    /// search; the retraining grid is in `retrain`.
    pub train: TrainConfig,
    pub candidates: Vec<Interaction>,
    pub search_epochs: usize,
    /// One per mode; a single entry is reused for every mode.
    pub transforms: Vec<TransformSpec>,
    /// Disable to search over operations only (identity element-wise maps).
    pub elementwise: bool,
    /// Evaluate the architecture gradient at a one-step look-ahead of the
    /// training parameters instead of at the current ones.
    pub lookahead: bool,
    pub arch_optimizer: ArchOptimizer,
    /// Step size for the architecture updates; `train.lr` when absent.
    pub arch_lr: Option<f64>,
    /// Keep `alpha` and the transforms fixed (no architecture updates).
    pub freeze_arch: bool,
    /// Starting `alpha`; uniform `1/d` when absent.
    pub initial_alpha: Option<Vec<f64>>,
    pub retrain: RetrainConfig,
    /// Skip retraining (search only).
    pub skip_retrain: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            train: TrainConfig::default(),
            candidates: OpKind::DEFAULT_SEARCH.iter().map(|&o| o.into()).collect(),
            search_epochs: 50,
            transforms: vec![TransformSpec::default()],
            elementwise: true,
            lookahead: false,
            arch_optimizer: ArchOptimizer::default(),
            arch_lr: None,
            freeze_arch: false,
            initial_alpha: None,
            retrain: RetrainConfig::default(),
            skip_retrain: false,
        }
    }
}

impl SearchConfig {
    /// Candidate set for third-order data: all composites over `base`.
    pub fn tensor_candidates(base: &[OpKind]) -> Result<Vec<Interaction>> {
        Ok(enumerate_tensor_ops(base)?.into_iter().map(Interaction::Triple).collect())
    }

    fn transform_spec(&self, mode: usize) -> TransformSpec {
        self.transforms
            .get(mode)
            .or_else(|| self.transforms.last())
            .copied()
            .unwrap_or_default()
    }

    pub fn validate(&self, ds: &RatingDataset) -> Result<()> {
        self.train.validate()?;
        if self.candidates.is_empty() {
            return Err(Error::Config("no candidate operations".into()));
        }
        let order = ds.dims().order();
        if let Some(op) = self.candidates.iter().find(|o| o.arity() != order) {
            return Err(Error::Config(format!("candidate '{op}' does not fit order-{order} data")));
        }
        if let Some(a) = &self.initial_alpha {
            if a.len() != self.candidates.len() {
                return Err(Error::Config("initial_alpha length differs from candidates".into()));
            }
        }
        if self.retrain.lambda_grid.is_empty() && !self.skip_retrain {
            return Err(Error::Config("empty lambda grid".into()));
        }
        if self.elementwise && self.transforms.iter().any(|t| t.hidden == 0) {
            return Err(Error::Config("transform hidden width must be positive".into()));
        }
        Ok(())
    }

    /// Random transforms for every mode, or identities when element-wise
    /// transforms are disabled.
    fn init_transforms(&self, order: usize) -> Vec<Option<TransformWeights>> {
        (0..order)
            .map(|m| {
                self.elementwise.then(|| {
                    let spec = self.transform_spec(m);
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.train.seed, &format!("transform/{m}")));
                    TransformWeights::random(spec.hidden, spec.activation, &mut rng)
                })
            })
            .collect()
    }
}

/// Sparsification applied to `alpha` before each forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sparsity {
    One,
    TopK(usize),
}

impl Sparsity {
    pub fn apply(self, alpha: &[f64]) -> Vec<f64> {
        match self {
            Sparsity::One => prox_c1(alpha),
            Sparsity::TopK(k) => prox_ck(alpha, k),
        }
    }

    fn count(self) -> usize {
        match self {
            Sparsity::One => 1,
            Sparsity::TopK(k) => k,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RetrainReport {
    pub lambda: f64,
    pub best_epoch: usize,
    pub valid_rmse: f64,
    pub test: EvalReport,
    pub history: Vec<EpochMetrics>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchReport {
    pub method: String,
    /// Selected operation(s), in candidate order.
    pub selected: Vec<Interaction>,
    pub candidates: Vec<Interaction>,
    /// Final continuous mixture weights.
    pub alpha: Vec<f64>,
    /// Final element-wise transforms per mode (`null` = identity).
    pub transforms: Vec<Option<TransformWeights>>,
    /// Final architecture as retrained (selected ops and their weights).
    pub architecture: Architecture,
    pub search_history: Vec<EpochMetrics>,
    /// `alpha` at the end of each search epoch.
    pub alpha_history: Vec<Vec<f64>>,
    pub search_seconds: f64,
    pub retrain: Option<RetrainReport>,
    pub seed: u64,
    pub config: SearchConfig,
    /// Retrained model (omitted from JSON unless requested).
    #[serde(skip)]
    pub model: Option<ModelParams>,
}

impl SearchReport {
    pub fn selected_names(&self) -> Vec<String> {
        self.selected.iter().map(ToString::to_string).collect()
    }

    pub fn test_rmse(&self) -> Option<f64> {
        self.retrain.as_ref().map(|r| r.test.rmse)
    }
}

/// Operation(s) and transforms picked by `alpha`: the support of its
/// sparsified view, with the corresponding weights.
pub fn extract_architecture(arch: &Architecture, sparsity: Sparsity) -> Architecture {
    let support = match sparsity {
        Sparsity::One => vec![crate::prox::argmax_abs(&arch.alpha)],
        Sparsity::TopK(k) => top_k_support(&arch.alpha, k),
    };
    let (ops, alpha) = if support.len() == 1 {
        (vec![arch.ops[support[0]]], vec![1.0])
    } else {
        (
            support.iter().map(|&i| arch.ops[i]).collect(),
            support.iter().map(|&i| arch.alpha[i]).collect(),
        )
    };
    Architecture {
        ops,
        alpha,
        transforms: arch.transforms.clone(),
    }
}

/// Parameters after one plain gradient step on the training loss.
fn lookahead_params(
    ev: &mut Evaluator,
    tr: &mut Trainer,
    arch: &Architecture,
    ds: &RatingDataset,
    batch: &Batch,
    lr: f64,
) -> ModelParams {
    ev.loss_and_grads(&tr.params, arch, ds, batch, tr.lambda, &mut tr.grads);
    let mut p = tr.params.clone();
    for (m, rows) in tr.grads.touched.iter().enumerate() {
        for &r in rows {
            let g = tr.grads.row(m, r);
            for (x, gi) in p.tables[m].row_mut(r).iter_mut().zip(g) {
                *x -= lr * gi;
            }
        }
    }
    for (h, g) in p.heads.iter_mut().zip(&tr.grads.heads) {
        for (x, gi) in h.params.iter_mut().zip(g) {
            *x -= lr * gi;
        }
    }
    p.project_heads();
    p
}

struct LoopOutput {
    arch: Architecture,
    params: ModelParams,
    history: Vec<EpochMetrics>,
    alpha_history: Vec<Vec<f64>>,
    seconds: f64,
}

/// The alternating loop. `start` overrides the initial transforms (and
/// alpha); `pin_alpha` keeps alpha fixed while transforms still learn.
fn search_loop(
    ds: &RatingDataset,
    cfg: &SearchConfig,
    sparsity: Sparsity,
    start: Option<&Architecture>,
    pin_alpha: bool,
) -> Result<LoopOutput> {
    cfg.validate(ds)?;
    if ds.split_len(Split::Validation) == 0 {
        return Err(Error::EmptySplit("validation"));
    }
    let d = cfg.candidates.len();
    if sparsity.count() > d || sparsity.count() == 0 {
        return Err(Error::Config(format!("cannot keep {} of {d} operations", sparsity.count())));
    }
    let search_cfg = TrainConfig {
        max_epochs: cfg.search_epochs.max(1),
        ..cfg.train.clone()
    };
    let mut tr = Trainer::new(ds, &cfg.candidates, &search_cfg)?;
    let mut valid = BatchSampler::new(
        ds,
        Split::Validation,
        cfg.train.batch_size,
        derive_seed(cfg.train.seed, "valid-batches"),
    )?;
    let mut arch = Architecture {
        ops: cfg.candidates.clone(),
        alpha: cfg.initial_alpha.clone().unwrap_or_else(|| vec![1.0 / d as f64; d]),
        transforms: match start {
            Some(a) => a.transforms.clone(),
            None => cfg.init_transforms(ds.dims().order()),
        },
    };
    arch.validate(&tr.params)?;
    let lr = cfg.train.lr;
    let mut ev = Evaluator::new(&tr.params, &arch);
    let mut view = arch.clone();
    let mut arch_step = ArchStep::new(cfg.arch_optimizer, cfg.arch_lr.unwrap_or(lr), &arch);
    let clock = Instant::now();
    let mut history = Vec::with_capacity(cfg.search_epochs);
    let mut alpha_history = Vec::with_capacity(cfg.search_epochs);

    for epoch in 1..=cfg.search_epochs {
        let mut h_sum = 0.0;
        let steps = tr.sampler.batches_per_epoch();
        for _ in 0..steps {
            let mut train_batch = None;
            if !cfg.freeze_arch {
                view.alpha = sparsity.apply(&arch.alpha);
                let vb = valid.next_batch();
                vb.require(Split::Validation)?;
                let (h, grads) = if cfg.lookahead {
                    let tb = tr.sampler.next_batch();
                    tb.require(Split::Train)?;
                    let ahead = lookahead_params(&mut ev, &mut tr, &view, ds, &tb, lr);
                    train_batch = Some(tb);
                    ev.arch_loss_and_grads(&ahead, &view, ds, &vb)
                } else {
                    ev.arch_loss_and_grads(&tr.params, &view, ds, &vb)
                };
                if !h.is_finite() {
                    return Err(Error::Diverged { epoch, loss: h });
                }
                h_sum += h;
                if !pin_alpha {
                    arch_step.alpha(&mut arch.alpha, &grads.alpha);
                }
                arch_step.transforms(&mut arch, &grads.transforms);
            }
            let tb = train_batch.unwrap_or_else(|| tr.sampler.next_batch());
            view.alpha = sparsity.apply(&arch.alpha);
            view.transforms.clone_from(&arch.transforms);
            tr.step(&mut ev, &view, ds, &tb)?;
        }
        view.alpha = sparsity.apply(&arch.alpha);
        let mut m = epoch_metrics(epoch, clock, &tr.params, &view, ds);
        if !cfg.freeze_arch {
            m.search_objective = Some(h_sum / steps as f64);
        }
        history.push(m);
        alpha_history.push(arch.alpha.clone());
    }
    Ok(LoopOutput {
        arch,
        params: tr.params,
        history,
        alpha_history,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Retrains `arch` from scratch over the lambda grid.
pub fn retrain(ds: &RatingDataset, arch: &Architecture, cfg: &SearchConfig) -> Result<(RetrainReport, ModelParams)> {
    let start = Instant::now();
    let train_cfg = TrainConfig {
        max_epochs: cfg.retrain.max_epochs,
        patience: cfg.retrain.patience,
        ..cfg.train.clone()
    };
    let (lambda, outcome, arch) = if cfg.retrain.relearn_transforms {
        relearn_grid(ds, arch, cfg, &train_cfg)?
    } else {
        let (l, o) = train_lambda_grid(ds, arch, &train_cfg, &cfg.retrain.lambda_grid)?;
        (l, o, arch.clone())
    };
    let test = evaluate(&outcome.params, &arch, ds, Split::Test)?;
    Ok((
        RetrainReport {
            lambda,
            best_epoch: outcome.best_epoch,
            valid_rmse: outcome.best_valid_rmse,
            test,
            history: outcome.history,
            seconds: start.elapsed().as_secs_f64(),
        },
        outcome.params,
    ))
}

/// Retraining variant that keeps updating the transforms on validation
/// batches while `alpha` stays pinned. Runs the full epoch budget at each
/// lambda and keeps the final state.
fn relearn_grid(
    ds: &RatingDataset,
    arch: &Architecture,
    cfg: &SearchConfig,
    train_cfg: &TrainConfig,
) -> Result<(f64, TrainOutcome, Architecture)> {
    let mut best: Option<(f64, TrainOutcome, Architecture)> = None;
    for &lambda in &cfg.retrain.lambda_grid {
        let c = SearchConfig {
            train: TrainConfig {
                lambda,
                ..train_cfg.clone()
            },
            candidates: arch.ops.clone(),
            initial_alpha: Some(arch.alpha.clone()),
            search_epochs: train_cfg.max_epochs,
            ..cfg.clone()
        };
        let run = search_loop(ds, &c, Sparsity::TopK(arch.ops.len()), Some(arch), true)?;
        let last = run.history.last().cloned().expect("at least one epoch");
        let outcome = TrainOutcome {
            params: run.params,
            best_epoch: run.history.len(),
            best_valid_rmse: last.valid_rmse,
            history: run.history,
        };
        if best.as_ref().is_none_or(|b| outcome.best_valid_rmse < b.1.best_valid_rmse) {
            best = Some((lambda, outcome, run.arch));
        }
    }
    Ok(best.unwrap())
}

fn run_search(ds: &RatingDataset, cfg: &SearchConfig, sparsity: Sparsity, method: &str) -> Result<SearchReport> {
    let LoopOutput {
        arch,
        history: search_history,
        alpha_history,
        seconds: search_seconds,
        ..
    } = search_loop(ds, cfg, sparsity, None, false)?;
    let picked = extract_architecture(&arch, sparsity);
    let (retrain_report, model) = if cfg.skip_retrain {
        (None, None)
    } else {
        let (r, p) = retrain(ds, &picked, cfg)?;
        (Some(r), Some(p))
    };
    let selected = picked.ops.clone();
    Ok(SearchReport {
        method: method.to_owned(),
        selected,
        candidates: cfg.candidates.clone(),
        alpha: arch.alpha.clone(),
        transforms: arch.transforms.clone(),
        architecture: picked,
        search_history,
        alpha_history,
        search_seconds,
        retrain: retrain_report,
        seed: cfg.train.seed,
        config: cfg.clone(),
        model,
    })
}

/// Searches for a single interaction function and retrains it.
pub fn sif_search(ds: &RatingDataset, cfg: &SearchConfig) -> Result<SearchReport> {
    run_search(ds, cfg, Sparsity::One, "sif")
}

/// As [`sif_search`], keeping the `k` operations with the largest weights.
pub fn sif_search_topk(ds: &RatingDataset, k: usize, cfg: &SearchConfig) -> Result<SearchReport> {
    if k == 0 || k > cfg.candidates.len() {
        return Err(Error::Config(format!(
            "top-k needs 1 <= k <= {}, got {k}",
            cfg.candidates.len()
        )));
    }
    let sparsity = if k == 1 { Sparsity::One } else { Sparsity::TopK(k) };
    run_search(ds, cfg, sparsity, if k == 1 { "sif" } else { "sif-topk" })
}

/// Bound on each transform weight for randomly sampled architectures.
pub const RANDOM_TRANSFORM_BOUND: f64 = 3.0;

/// One randomly drawn architecture: uniform operation, transform weights
/// uniform in `[-3, 3]` (not projected).
pub fn sample_architecture<R: Rng + ?Sized>(cfg: &SearchConfig, order: usize, rng: &mut R) -> Architecture {
    let op = cfg.candidates[rng.random_range(0..cfg.candidates.len())];
    let transforms = (0..order)
        .map(|m| {
            cfg.elementwise.then(|| {
                let spec = cfg.transform_spec(m);
                TransformWeights::uniform(spec.hidden, spec.activation, RANDOM_TRANSFORM_BOUND, rng)
            })
        })
        .collect();
    Architecture::single(op).with_transforms(transforms)
}

/// Trains `budget` random architectures at `cfg.train.lambda`, keeps the one
/// with the best validation RMSE, and retrains it over the lambda grid.
pub fn random_search(ds: &RatingDataset, budget: usize, cfg: &SearchConfig) -> Result<SearchReport> {
    if budget < 1 {
        return Err(Error::Config("random search budget must be at least 1".into()));
    }
    cfg.validate(ds)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.train.seed, "random-search"));
    let train_cfg = TrainConfig {
        max_epochs: cfg.search_epochs.max(1),
        ..cfg.train.clone()
    };
    let mut best: Option<(f64, Architecture)> = None;
    let mut history = Vec::with_capacity(budget);
    for trial in 1..=budget {
        let arch = sample_architecture(cfg, ds.dims().order(), &mut rng);
        let out = train_fixed(ds, &arch, &train_cfg)?;
        let mut m = out.history[out.best_epoch - 1].clone();
        m.epoch = trial;
        m.seconds = start.elapsed().as_secs_f64();
        m.search_objective = Some(out.best_valid_rmse);
        history.push(m);
        if best.as_ref().is_none_or(|b| out.best_valid_rmse < b.0) {
            best = Some((out.best_valid_rmse, arch));
        }
    }
    let (_, picked) = best.unwrap();
    let search_seconds = start.elapsed().as_secs_f64();
    let (retrain_report, model) = if cfg.skip_retrain {
        (None, None)
    } else {
        let (r, p) = retrain(ds, &picked, cfg)?;
        (Some(r), Some(p))
    };
    let alpha = cfg
        .candidates
        .iter()
        .map(|c| if *c == picked.ops[0] { 1.0 } else { 0.0 })
        .collect();
    Ok(SearchReport {
        method: "random".into(),
        selected: picked.ops.clone(),
        candidates: cfg.candidates.clone(),
        alpha,
        transforms: picked.transforms.clone(),
        architecture: picked,
        search_history: history,
        alpha_history: Vec::new(),
        search_seconds,
        retrain: retrain_report,
        seed: cfg.train.seed,
        config: cfg.clone(),
        model,
    })
}
