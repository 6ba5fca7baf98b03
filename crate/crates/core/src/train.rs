//! Adagrad training of model parameters for a fixed architecture.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{Batch, BatchSampler, RatingDataset, Split};
use crate::error::{Error, Result};
use crate::metrics::{ranking_metrics, rmse, EvalReport, POSITIVE_RATING};
use crate::model::{derive_seed, Architecture, Evaluator, ModelGrads, ModelParams, PredictorMode};

/// Regularization grid searched at (re)training time.
pub const LAMBDA_GRID: [f64; 6] = [0.0, 1e-6, 5e-6, 1e-5, 5e-5, 1e-4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Embedding dimension.
    pub dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub init_std: f64,
    pub predictor: PredictorMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 8,
            lr: 0.05,
            batch_size: 256,
            lambda: 0.0,
            max_epochs: 200,
            patience: 10,
            init_std: 0.1,
            predictor: PredictorMode::Linear,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim == 0 {
            return bad("embedding dim must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad("init_std must be non-negative");
        }
        Ok(())
    }
}

/// Per-coordinate Adagrad: `x -= lr * g / sqrt(G + eps)` with `G += g^2`.
#[derive(Clone, Debug)]
pub struct Adagrad {
    pub lr: f64,
    pub eps: f64,
    tables: Vec<Vec<f64>>,
    heads: Vec<Vec<f64>>,
}

impl Adagrad {
    pub const EPS: f64 = 1e-8;

    pub fn new(params: &ModelParams, lr: f64) -> Self {
        Adagrad {
            lr,
            eps: Self::EPS,
            tables: params.tables.iter().map(|t| vec![0.0; t.data.len()]).collect(),
            heads: params.heads.iter().map(|h| vec![0.0; h.params.len()]).collect(),
        }
    }

    pub fn accumulators(&self) -> impl Iterator<Item = f64> + '_ {
        self.tables.iter().chain(&self.heads).flat_map(|v| v.iter().copied())
    }

    #[inline]
    pub(crate) fn update(x: &mut [f64], g: &[f64], acc: &mut [f64], lr: f64, eps: f64) {
        for ((x, g), a) in x.iter_mut().zip(g).zip(acc.iter_mut()) {
            *a += g * g;
            *x -= lr * g / (*a + eps).sqrt();
        }
    }

    /// Applies one step on touched rows and all heads, then projects linear
    /// heads onto the unit ball.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelGrads) {
        let k = params.dim;
        for (m, rows) in grads.touched.iter().enumerate() {
            for &r in rows {
                let span = r * k..(r + 1) * k;
                Self::update(
                    &mut params.tables[m].data[span.clone()],
                    grads.row(m, r),
                    &mut self.tables[m][span],
                    self.lr,
                    self.eps,
                );
            }
        }
        for (h, (g, acc)) in params.heads.iter_mut().zip(grads.heads.iter().zip(&mut self.heads)) {
            Self::update(&mut h.params, g, acc, self.lr, self.eps);
        }
        params.project_heads();
    }
}

pub fn adagrad_step(params: &mut ModelParams, grads: &ModelGrads, state: &mut Adagrad) {
    state.step(params, grads);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub seconds: f64,
    pub train_rmse: f64,
    pub valid_rmse: f64,
    pub test_rmse: f64,
    /// Mean validation objective of the architecture updates (search only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_objective: Option<f64>,
}

impl EpochMetrics {
    pub const CSV_HEADER: [&'static str; 6] = [
        "epoch",
        "seconds",
        "train_rmse",
        "valid_rmse",
        "test_rmse",
        "search_objective",
    ];
}

/// RMSE of `split`, or NaN when the split is empty.
pub fn split_rmse(params: &ModelParams, arch: &Architecture, ds: &RatingDataset, split: Split) -> f64 {
    let (p, t) = Evaluator::new(params, arch).predict_split(params, arch, ds, split);
    rmse(&p, &t).unwrap_or(f64::NAN)
}

pub(crate) fn epoch_metrics(
    epoch: usize,
    start: Instant,
    params: &ModelParams,
    arch: &Architecture,
    ds: &RatingDataset,
) -> EpochMetrics {
    let preds = Evaluator::new(params, arch).predict_all(params, arch, ds);
    let mut sse = [0.0; 3];
    let mut count = [0usize; 3];
    for ((p, rec), s) in preds.iter().zip(ds.records()).zip(ds.assignment()) {
        sse[*s as usize] += (p - rec.value) * (p - rec.value);
        count[*s as usize] += 1;
    }
    let rmse_of = |s: Split| (sse[s as usize] / count[s as usize] as f64).sqrt();
    EpochMetrics {
        epoch,
        seconds: start.elapsed().as_secs_f64(),
        train_rmse: rmse_of(Split::Train),
        valid_rmse: rmse_of(Split::Validation),
        test_rmse: rmse_of(Split::Test),
        search_objective: None,
    }
}

/// Training state shared by fixed training and the training half of search.
pub(crate) struct Trainer {
    pub params: ModelParams,
    pub opt: Adagrad,
    pub sampler: BatchSampler,
    pub grads: ModelGrads,
    pub lambda: f64,
}

impl Trainer {
    pub fn new(ds: &RatingDataset, ops: &[crate::ops::Interaction], cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let params = ModelParams::init(ds.dims(), cfg.dim, ops, cfg.predictor, cfg.init_std, cfg.seed);
        let sampler = BatchSampler::new(ds, Split::Train, cfg.batch_size, derive_seed(cfg.seed, "train-batches"))?;
        Ok(Trainer {
            opt: Adagrad::new(&params, cfg.lr),
            grads: ModelGrads::zeros_like(&params),
            params,
            sampler,
            lambda: cfg.lambda,
        })
    }

    /// One Adagrad step on `batch`, which must come from the training split.
    pub fn step(&mut self, ev: &mut Evaluator, arch: &Architecture, ds: &RatingDataset, batch: &Batch) -> Result<f64> {
        batch.require(Split::Train)?;
        let loss = ev.loss_and_grads(&self.params, arch, ds, batch, self.lambda, &mut self.grads);
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch: self.sampler.epoch(),
                loss,
            });
        }
        self.opt.step(&mut self.params, &self.grads);
        Ok(loss)
    }
}

/// RMSE on `split`, plus Hit@{5,10} and NDCG@{5,10} for matrix data when
/// some user has a positive item in the split.
pub fn evaluate(params: &ModelParams, arch: &Architecture, ds: &RatingDataset, split: Split) -> Result<EvalReport> {
    arch.validate(params)?;
    let mut ev = Evaluator::new(params, arch);
    let (preds, targets) = ev.predict_split(params, arch, ds, split);
    let rmse = rmse(&preds, &targets)?;
    let mut ranking = Vec::new();
    let mut ranked_users = 0;
    if ds.dims().order() == 2 {
        let mut scores = vec![0.0; ds.len()];
        for (idx, p) in ds.split_indices(split).into_iter().zip(&preds) {
            scores[idx] = *p;
        }
        match ranking_metrics(ds, split, &[5, 10], |i| scores[i]) {
            Ok(r) => {
                ranking = r;
                let mut users: Vec<usize> = ds
                    .split_indices(split)
                    .into_iter()
                    .map(|i| ds.record(i))
                    .filter(|r| r.value >= POSITIVE_RATING)
                    .map(|r| r.row)
                    .collect();
                users.sort_unstable();
                users.dedup();
                ranked_users = users.len();
            }
            Err(Error::NoQualifyingUsers) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(EvalReport {
        split,
        rmse,
        count: targets.len(),
        ranking,
        ranked_users,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the best validation RMSE.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_valid_rmse: f64,
    pub history: Vec<EpochMetrics>,
}

impl TrainOutcome {
    pub fn test_rmse(&self) -> f64 {
        self.history[self.best_epoch - 1].test_rmse
    }
}

/// Trains model parameters for a fixed architecture with early stopping on
/// validation RMSE. The architecture is never modified.
pub fn train_fixed(ds: &RatingDataset, arch: &Architecture, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut tr = Trainer::new(ds, &arch.ops, cfg)?;
    arch.validate(&tr.params)?;
    let has_valid = ds.split_len(Split::Validation) > 0;
    let mut ev = Evaluator::new(&tr.params, arch);
    let start = Instant::now();
    let mut history = Vec::new();
    let mut best = (0usize, f64::INFINITY, tr.params.clone());
    for epoch in 1..=cfg.max_epochs {
        for _ in 0..tr.sampler.batches_per_epoch() {
            let batch = tr.sampler.next_batch();
            tr.step(&mut ev, arch, ds, &batch)?;
        }
        let m = epoch_metrics(epoch, start, &tr.params, arch, ds);
        if !m.train_rmse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: m.train_rmse,
            });
        }
        let score = if has_valid { m.valid_rmse } else { m.train_rmse };
        history.push(m);
        if score < best.1 {
            best = (epoch, score, tr.params.clone());
        } else if epoch - best.0 >= cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        params: best.2,
        best_epoch: best.0,
        best_valid_rmse: best.1,
        history,
    })
}

/// Runs [`train_fixed`] at every `lambda` in `grid` and keeps the run with
/// the best validation RMSE. Returns the winning lambda and outcome.
pub fn train_lambda_grid(
    ds: &RatingDataset,
    arch: &Architecture,
    cfg: &TrainConfig,
    grid: &[f64],
) -> Result<(f64, TrainOutcome)> {
    use rayon::prelude::*;
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let runs: Vec<Result<TrainOutcome>> = grid
        .par_iter()
        .map(|&lambda| {
            let c = TrainConfig { lambda, ..cfg.clone() };
            train_fixed(ds, arch, &c)
        })
        .collect();
    let mut best: Option<(f64, TrainOutcome)> = None;
    for (lambda, run) in grid.iter().zip(runs) {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.best_valid_rmse < b.1.best_valid_rmse) {
            best = Some((*lambda, run));
        }
    }
    Ok(best.unwrap())
}
