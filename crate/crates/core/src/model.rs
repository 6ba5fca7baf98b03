//! The relaxed interaction model and its hand-derived gradients.
//!
//! A prediction for an observed entry is
//!
//! ```text
//! sum_m alpha_m * head_m( op_m( g_p(u_i), g_q(v_j) [, g_r(s_l)] ) )
//! ```
//!
//! where `g_*` are element-wise transforms (or the identity), `op_m` are the
//! candidate interaction functions and `head_m` is either a linear predictor
//! `w_m^T x` constrained to the unit ball or a small ReLU MLP.
//!
//! Model parameters (embedding tables and heads) are fitted on training data;
//! architecture parameters (`alpha` and the transforms) on validation data.
//! [`Evaluator`] computes both gradient families from one forward pass.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Batch, Dims, RatingDataset, RatingRecord, Split};
use crate::error::{Error, Result};
use crate::ops::Interaction;
use crate::prox::project_unit_ball;
use crate::transform::TransformWeights;

/// Hidden width of the MLP predictor head.
pub const MLP_HIDDEN: usize = 10;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
        let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorMode {
    #[default]
    Linear,
    Mlp,
}

impl fmt::Display for PredictorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictorMode::Linear => "linear",
            PredictorMode::Mlp => "mlp",
        })
    }
}

impl FromStr for PredictorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(PredictorMode::Linear),
            "mlp" => Ok(PredictorMode::Mlp),
            other => Err(Error::Config(format!("unknown predictor '{other}'"))),
        }
    }
}

/// Scalar read-out of one interaction output.
///
/// Linear heads store `w`. MLP heads store `[W1 (hidden x in, row-major); b1; w2; b2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub mode: PredictorMode,
    pub input_dim: usize,
    pub params: Vec<f64>,
}

impl Head {
    pub fn param_len(mode: PredictorMode, input_dim: usize) -> usize {
        match mode {
            PredictorMode::Linear => input_dim,
            PredictorMode::Mlp => MLP_HIDDEN * input_dim + 2 * MLP_HIDDEN + 1,
        }
    }

    /// Linear: `w = 1/sqrt(in)` in every coordinate (unit norm).
    /// MLP: He-style normal weights, zero biases.
    pub fn init<R: Rng + ?Sized>(mode: PredictorMode, input_dim: usize, rng: &mut R) -> Self {
        let params = match mode {
            PredictorMode::Linear => vec![1.0 / (input_dim as f64).sqrt(); input_dim],
            PredictorMode::Mlp => {
                let h = MLP_HIDDEN;
                let n1 = Normal::new(0.0, (2.0 / input_dim as f64).sqrt()).unwrap();
                let n2 = Normal::new(0.0, (1.0 / h as f64).sqrt()).unwrap();
                let mut p = Vec::with_capacity(Self::param_len(mode, input_dim));
                p.extend((0..h * input_dim).map(|_| n1.sample(rng)));
                p.extend(std::iter::repeat_n(0.0, h));
                p.extend((0..h).map(|_| n2.sample(rng)));
                p.push(0.0);
                p
            }
        };
        Head {
            mode,
            input_dim,
            params,
        }
    }

    #[inline]
    pub fn forward(&self, x: &[f64]) -> f64 {
        match self.mode {
            PredictorMode::Linear => dot(&self.params, x),
            PredictorMode::Mlp => {
                let (n, h) = (self.input_dim, MLP_HIDDEN);
                let p = &self.params;
                let mut y = p[h * n + 2 * h];
                for j in 0..h {
                    let z = dot(&p[j * n..(j + 1) * n], x) + p[h * n + j];
                    if z > 0.0 {
                        y += p[h * n + h + j] * z;
                    }
                }
                y
            }
        }
    }

    /// Accumulates `upstream * d head / d params` into `grad_params` and
    /// `upstream * d head / d x` into `grad_x` (either may be skipped).
    #[inline]
    pub fn backward(&self, x: &[f64], upstream: f64, grad_params: Option<&mut [f64]>, grad_x: &mut [f64]) {
        match self.mode {
            PredictorMode::Linear => {
                for (g, w) in grad_x.iter_mut().zip(&self.params) {
                    *g += upstream * w;
                }
                if let Some(gp) = grad_params {
                    for (g, xi) in gp.iter_mut().zip(x) {
                        *g += upstream * xi;
                    }
                }
            }
            PredictorMode::Mlp => {
                let (n, h) = (self.input_dim, MLP_HIDDEN);
                let p = &self.params;
                let mut gp = grad_params;
                for j in 0..h {
                    let row = &p[j * n..(j + 1) * n];
                    let z = dot(row, x) + p[h * n + j];
                    if z <= 0.0 {
                        continue;
                    }
                    let back = upstream * p[h * n + h + j];
                    for (g, w) in grad_x.iter_mut().zip(row) {
                        *g += back * w;
                    }
                    if let Some(gp) = gp.as_deref_mut() {
                        for (g, xi) in gp[j * n..(j + 1) * n].iter_mut().zip(x) {
                            *g += back * xi;
                        }
                        gp[h * n + j] += back;
                        gp[h * n + h + j] += upstream * z;
                    }
                }
                if let Some(gp) = gp {
                    gp[h * n + 2 * h] += upstream;
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Seed stream for a named component, so that e.g. the head for `plus`
/// starts identically whatever other candidates share the model.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the seed
    let mut h: u64 = 0xcbf29ce484222325 ^ seed.wrapping_mul(0x9E3779B97F4A7C15);
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Everything fitted on training data: embedding tables (one per mode) and
/// one predictor head per candidate operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub tables: Vec<Matrix>,
    pub heads: Vec<Head>,
}

impl ModelParams {
    /// Embeddings i.i.d. `N(0, init_std^2)`; heads seeded per operation name.
    pub fn init(
        dims: Dims,
        dim: usize,
        ops: &[Interaction],
        mode: PredictorMode,
        init_std: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "embeddings"));
        let tables = dims
            .mode_sizes()
            .into_iter()
            .map(|n| Matrix::random_normal(n, dim, init_std, &mut rng))
            .collect();
        let heads = ops
            .iter()
            .map(|op| {
                let mut r = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("head/{op}")));
                Head::init(mode, op.output_dim(dim), &mut r)
            })
            .collect();
        ModelParams { dim, tables, heads }
    }

    pub fn order(&self) -> usize {
        self.tables.len()
    }

    /// Projects every linear head onto the unit ball.
    pub fn project_heads(&mut self) {
        for h in &mut self.heads {
            if h.mode == PredictorMode::Linear {
                let w = std::mem::take(&mut h.params);
                h.params = project_unit_ball(w);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tables.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
            && self.heads.iter().all(|h| h.params.iter().all(|x| x.is_finite()))
    }
}

/// Architecture: candidate operations, their mixture weights, and one
/// optional element-wise transform per mode (`None` = identity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub ops: Vec<Interaction>,
    pub alpha: Vec<f64>,
    pub transforms: Vec<Option<TransformWeights>>,
}

impl Architecture {
    /// A single operation with weight 1 and identity transforms.
    pub fn single(op: Interaction) -> Self {
        Architecture {
            ops: vec![op],
            alpha: vec![1.0],
            transforms: vec![None; op.arity()],
        }
    }

    pub fn with_transforms(mut self, transforms: Vec<Option<TransformWeights>>) -> Self {
        self.transforms = transforms;
        self
    }

    pub fn order(&self) -> usize {
        self.transforms.len()
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.ops.is_empty() {
            return Err(Error::Config("architecture has no operations".into()));
        }
        if self.alpha.len() != self.ops.len() || params.heads.len() != self.ops.len() {
            return Err(Error::Config(format!(
                "{} ops, {} alpha entries, {} heads",
                self.ops.len(),
                self.alpha.len(),
                params.heads.len()
            )));
        }
        if self.transforms.len() != params.order() {
            return Err(Error::Config(format!(
                "{} transforms for order-{} data",
                self.transforms.len(),
                params.order()
            )));
        }
        for (op, head) in self.ops.iter().zip(&params.heads) {
            if op.arity() != params.order() {
                return Err(Error::Config(format!("op '{op}' does not match data order {}", params.order())));
            }
            if head.input_dim != op.output_dim(params.dim) {
                return Err(Error::Config(format!("head for '{op}' has wrong input size")));
            }
        }
        Ok(())
    }
}

/// Gradients with respect to [`ModelParams`]. Embedding gradients are dense
/// tables with a list of the rows a batch touched.
#[derive(Clone, Debug)]
pub struct ModelGrads {
    pub tables: Vec<Matrix>,
    pub touched: Vec<Vec<usize>>,
    pub heads: Vec<Vec<f64>>,
    marks: Vec<Vec<bool>>,
}

impl ModelGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ModelGrads {
            tables: params.tables.iter().map(|t| Matrix::zeros(t.rows, t.cols)).collect(),
            touched: vec![Vec::new(); params.tables.len()],
            heads: params.heads.iter().map(|h| vec![0.0; h.params.len()]).collect(),
            marks: params.tables.iter().map(|t| vec![false; t.rows]).collect(),
        }
    }

    pub fn clear(&mut self) {
        for (m, rows) in self.touched.iter_mut().enumerate() {
            for &r in rows.iter() {
                self.tables[m].row_mut(r).fill(0.0);
                self.marks[m][r] = false;
            }
            rows.clear();
        }
        for h in &mut self.heads {
            h.fill(0.0);
        }
    }

    #[inline]
    fn touch(&mut self, mode: usize, row: usize) {
        if !self.marks[mode][row] {
            self.marks[mode][row] = true;
            self.touched[mode].push(row);
        }
    }

    /// Dense embedding gradient row (zero for untouched rows).
    pub fn row(&self, mode: usize, row: usize) -> &[f64] {
        self.tables[mode].row(row)
    }
}

/// Gradients with respect to the architecture: every `alpha_m` and the flat
/// parameters of each present transform.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchGrads {
    pub alpha: Vec<f64>,
    pub transforms: Vec<Option<Vec<f64>>>,
}

impl ArchGrads {
    pub fn zeros_like(arch: &Architecture) -> Self {
        ArchGrads {
            alpha: vec![0.0; arch.ops.len()],
            transforms: arch
                .transforms
                .iter()
                .map(|t| t.as_ref().map(|t| vec![0.0; t.params().len()]))
                .collect(),
        }
    }
}

/// Forward/backward over records for one (params, architecture) pair.
/// Holds scratch buffers; create one per thread.
pub struct Evaluator {
    dim: usize,
    order: usize,
    transformed: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    op_out: Vec<Vec<f64>>,
    head_out: Vec<f64>,
    grad_out: Vec<f64>,
    grad_in: Vec<Vec<f64>>,
}

/// Which gradients a backward pass should produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Want {
    Model,
    Arch,
}

impl Evaluator {
    pub fn new(params: &ModelParams, arch: &Architecture) -> Self {
        let k = params.dim;
        let max_out = arch.ops.iter().map(|o| o.output_dim(k)).max().unwrap_or(1);
        Evaluator {
            dim: k,
            order: params.order(),
            transformed: vec![vec![0.0; k]; params.order()],
            slopes: vec![vec![1.0; k]; params.order()],
            op_out: arch.ops.iter().map(|o| vec![0.0; o.output_dim(k)]).collect(),
            head_out: vec![0.0; arch.ops.len()],
            grad_out: vec![0.0; max_out],
            grad_in: vec![vec![0.0; k]; params.order()],
        }
    }

    /// Fills transformed embeddings (and slopes) for `rec`.
    #[inline]
    fn embed(&mut self, params: &ModelParams, arch: &Architecture, rec: &RatingRecord, slopes: bool) {
        for m in 0..self.order {
            let raw = params.tables[m].row(rec.index(m));
            let out = &mut self.transformed[m];
            match &arch.transforms[m] {
                None => {
                    out.copy_from_slice(raw);
                    if slopes {
                        self.slopes[m].fill(1.0);
                    }
                }
                Some(t) if slopes => {
                    for l in 0..self.dim {
                        let (y, dy) = t.apply_with_slope(raw[l]);
                        out[l] = y;
                        self.slopes[m][l] = dy;
                    }
                }
                Some(t) => {
                    for l in 0..self.dim {
                        out[l] = t.apply(raw[l]);
                    }
                }
            }
        }
    }

    /// Runs every op with nonzero weight, or every op when `all` is set.
    #[inline]
    fn forward_ops(&mut self, params: &ModelParams, arch: &Architecture, all: bool) -> f64 {
        let inputs: Vec<&[f64]> = self.transformed.iter().map(Vec::as_slice).collect();
        let mut pred = 0.0;
        for (m, op) in arch.ops.iter().enumerate() {
            let a = arch.alpha[m];
            if a == 0.0 && !all {
                self.head_out[m] = 0.0;
                continue;
            }
            op.forward(&inputs, &mut self.op_out[m]);
            let h = params.heads[m].forward(&self.op_out[m]);
            self.head_out[m] = h;
            pred += a * h;
        }
        pred
    }

    pub fn predict(&mut self, params: &ModelParams, arch: &Architecture, rec: &RatingRecord) -> f64 {
        self.embed(params, arch, rec, false);
        self.forward_ops(params, arch, false)
    }

    /// Per-op head outputs `head_m(op_m(...))` for every candidate.
    pub fn head_outputs(&mut self, params: &ModelParams, arch: &Architecture, rec: &RatingRecord) -> Vec<f64> {
        self.embed(params, arch, rec, false);
        self.forward_ops(params, arch, true);
        self.head_out.clone()
    }

    /// Backpropagates `dloss` (d loss / d prediction) for one record whose
    /// forward pass is still in the scratch buffers.
    fn backward(
        &mut self,
        params: &ModelParams,
        arch: &Architecture,
        rec: &RatingRecord,
        dloss: f64,
        want: Want,
        mg: Option<&mut ModelGrads>,
        ag: Option<&mut ArchGrads>,
    ) {
        let k = self.dim;
        for g in &mut self.grad_in {
            g.fill(0.0);
        }
        let mut mg = mg;
        let mut ag = ag;
        if let Some(ag) = ag.as_deref_mut() {
            for (g, h) in ag.alpha.iter_mut().zip(&self.head_out) {
                *g += dloss * h;
            }
        }
        let inputs: Vec<&[f64]> = self.transformed.iter().map(Vec::as_slice).collect();
        for (m, op) in arch.ops.iter().enumerate() {
            let a = arch.alpha[m];
            if a == 0.0 {
                continue;
            }
            let n_out = op.output_dim(k);
            let gout = &mut self.grad_out[..n_out];
            gout.fill(0.0);
            let head_grad = match (want, mg.as_deref_mut()) {
                (Want::Model, Some(mg)) => Some(mg.heads[m].as_mut_slice()),
                _ => None,
            };
            params.heads[m].backward(&self.op_out[m], dloss * a, head_grad, gout);
            op.backward(&inputs, gout, &mut self.grad_in);
        }
        for mode in 0..self.order {
            let raw = params.tables[mode].row(rec.index(mode));
            match want {
                Want::Model => {
                    if let Some(mg) = mg.as_deref_mut() {
                        let row = rec.index(mode);
                        mg.touch(mode, row);
                        let dst = mg.tables[mode].row_mut(row);
                        for l in 0..k {
                            dst[l] += self.grad_in[mode][l] * self.slopes[mode][l];
                        }
                    }
                }
                Want::Arch => {
                    if let (Some(ag), Some(t)) = (ag.as_deref_mut(), &arch.transforms[mode]) {
                        let dst = ag.transforms[mode].as_mut().unwrap();
                        for l in 0..k {
                            t.accumulate_param_grad(raw[l], self.grad_in[mode][l], dst);
                        }
                    }
                }
            }
        }
    }

    /// Training objective on a batch: mean squared error plus
    /// `lambda/2 * ||row||^2` for every embedding row the batch touches.
    /// Writes gradients into `grads` (cleared first) and returns the loss.
    pub fn loss_and_grads(
        &mut self,
        params: &ModelParams,
        arch: &Architecture,
        ds: &RatingDataset,
        batch: &Batch,
        lambda: f64,
        grads: &mut ModelGrads,
    ) -> f64 {
        grads.clear();
        let scale = 1.0 / batch.len() as f64;
        let mut sse = 0.0;
        for rec in batch.records(ds) {
            self.embed(params, arch, rec, true);
            let pred = self.forward_ops(params, arch, false);
            let r = pred - rec.value;
            sse += r * r;
            self.backward(params, arch, rec, 2.0 * r * scale, Want::Model, Some(grads), None);
        }
        let mut reg = 0.0;
        if lambda > 0.0 {
            for (m, rows) in grads.touched.iter().enumerate() {
                for &r in rows {
                    let src = params.tables[m].row(r);
                    reg += 0.5 * lambda * dot(src, src);
                    for (g, x) in grads.tables[m].row_mut(r).iter_mut().zip(src) {
                        *g += lambda * x;
                    }
                }
            }
        }
        sse * scale + reg
    }

    /// Validation objective (mean squared error) on a batch and its
    /// gradient with respect to every `alpha_m` and each transform.
    pub fn arch_loss_and_grads(
        &mut self,
        params: &ModelParams,
        arch: &Architecture,
        ds: &RatingDataset,
        batch: &Batch,
    ) -> (f64, ArchGrads) {
        let mut ag = ArchGrads::zeros_like(arch);
        let scale = 1.0 / batch.len() as f64;
        let mut sse = 0.0;
        for rec in batch.records(ds) {
            self.embed(params, arch, rec, true);
            let pred = self.forward_ops(params, arch, true);
            let r = pred - rec.value;
            sse += r * r;
            self.backward(params, arch, rec, 2.0 * r * scale, Want::Arch, None, Some(&mut ag));
        }
        (sse * scale, ag)
    }

    /// Predictions for every record of `split`, in record order.
    pub fn predict_split(
        &mut self,
        params: &ModelParams,
        arch: &Architecture,
        ds: &RatingDataset,
        split: Split,
    ) -> (Vec<f64>, Vec<f64>) {
        if let Some((p, a)) = materialize(params, arch) {
            return Evaluator::new(&p, &a).predict_split(&p, &a, ds, split);
        }
        let mut preds = Vec::new();
        let mut targets = Vec::new();
        for (rec, s) in ds.records().iter().zip(ds.assignment()) {
            if *s == split {
                preds.push(self.predict(params, arch, rec));
                targets.push(rec.value);
            }
        }
        (preds, targets)
    }

    /// Predictions for every record, in record order.
    pub fn predict_all(&mut self, params: &ModelParams, arch: &Architecture, ds: &RatingDataset) -> Vec<f64> {
        if let Some((p, a)) = materialize(params, arch) {
            return Evaluator::new(&p, &a).predict_all(&p, &a, ds);
        }
        ds.records().iter().map(|rec| self.predict(params, arch, rec)).collect()
    }
}

/// Embedding tables with the element-wise transforms already applied, paired
/// with the same architecture minus its transforms. Predictions are
/// identical, but each embedding entry is transformed once instead of once
/// per rating. `None` when there is nothing to apply.
pub fn materialize(params: &ModelParams, arch: &Architecture) -> Option<(ModelParams, Architecture)> {
    if arch.transforms.iter().all(Option::is_none) {
        return None;
    }
    let mut p = params.clone();
    for (table, t) in p.tables.iter_mut().zip(&arch.transforms) {
        if let Some(t) = t {
            for x in &mut table.data {
                *x = t.apply(*x);
            }
        }
    }
    let a = Architecture {
        transforms: vec![None; arch.transforms.len()],
        ..arch.clone()
    };
    Some((p, a))
}

/// Checked single prediction.
pub fn predict(params: &ModelParams, arch: &Architecture, rec: &RatingRecord) -> Result<f64> {
    arch.validate(params)?;
    for m in 0..params.order() {
        let idx = if m < 2 || rec.depth.is_some() {
            rec.index(m)
        } else {
            return Err(Error::IndexOutOfRange("record lacks a third index".into()));
        };
        if idx >= params.tables[m].rows {
            return Err(Error::IndexOutOfRange(format!(
                "mode {m} index {idx} >= {}",
                params.tables[m].rows
            )));
        }
    }
    Ok(Evaluator::new(params, arch).predict(params, arch, rec))
}

/// Allocating wrapper around [`Evaluator::loss_and_grads`].
pub fn loss_and_grads(
    params: &ModelParams,
    arch: &Architecture,
    ds: &RatingDataset,
    batch: &Batch,
    lambda: f64,
) -> (f64, ModelGrads) {
    let mut grads = ModelGrads::zeros_like(params);
    let loss = Evaluator::new(params, arch).loss_and_grads(params, arch, ds, batch, lambda, &mut grads);
    (loss, grads)
}

/// Full-table objective `sum of squared errors over split + lambda/2 sum ||table||_F^2`.
pub fn full_objective(params: &ModelParams, arch: &Architecture, ds: &RatingDataset, split: Split, lambda: f64) -> f64 {
    let mut ev = Evaluator::new(params, arch);
    let (p, t) = ev.predict_split(params, arch, ds, split);
    let data: f64 = p.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum();
    let reg: f64 = params.tables.iter().map(Matrix::frobenius_sq).sum();
    data + 0.5 * lambda * reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::OpKind;
    use crate::transform::Activation;

    fn tiny() -> (RatingDataset, ModelParams) {
        let recs = vec![
            RatingRecord::matrix(0, 0, 3.0),
            RatingRecord::matrix(1, 2, 1.0),
            RatingRecord::matrix(2, 1, 5.0),
        ];
        let ds = RatingDataset::new(recs, Dims::matrix(3, 3)).unwrap();
        let ops: Vec<Interaction> = vec![OpKind::Inner.into()];
        let p = ModelParams::init(ds.dims(), 4, &ops, PredictorMode::Linear, 0.5, 7);
        (ds, p)
    }

    #[test]
    fn inner_with_uniform_head_is_scaled_mf() {
        let (ds, mut p) = tiny();
        let arch = Architecture::single(OpKind::Multiply.into());
        p.heads = vec![Head {
            mode: PredictorMode::Linear,
            input_dim: 4,
            params: vec![0.5; 4],
        }];
        let rec = ds.record(1);
        let expect = dot(p.tables[0].row(1), p.tables[1].row(2)) / 2.0;
        assert!((predict(&p, &arch, rec).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_transforms_give_bias_constant() {
        let (ds, mut p) = tiny();
        let arch = Architecture::single(OpKind::Multiply.into()).with_transforms(vec![
            Some(TransformWeights::from_parts(Activation::Sigmoid, &[0.0; 5], &[0.0; 5], &[0.0; 5], 0.5).unwrap()),
            Some(TransformWeights::from_parts(Activation::Sigmoid, &[0.0; 5], &[0.0; 5], &[0.0; 5], 0.4).unwrap()),
        ]);
        p.heads = vec![Head::init(PredictorMode::Linear, 4, &mut ChaCha8Rng::seed_from_u64(0))];
        let a = predict(&p, &arch, ds.record(0)).unwrap();
        let b = predict(&p, &arch, ds.record(2)).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.2 * 4.0 * 0.5).abs() < 1e-14);
    }

    #[test]
    fn predict_checks_indices() {
        let (_, p) = tiny();
        let arch = Architecture::single(OpKind::Inner.into());
        assert!(predict(&p, &arch, &RatingRecord::matrix(9, 0, 1.0)).is_err());
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        let (ds, p) = tiny();
        let arch = Architecture::single(OpKind::Inner.into());
        let target = predict(&p, &arch, ds.record(0)).unwrap();
        let ds1 = RatingDataset::new(vec![RatingRecord::matrix(0, 0, target)], Dims::matrix(3, 3)).unwrap();
        let batch = Batch {
            split: Split::Train,
            indices: vec![0],
        };
        let (loss, g) = loss_and_grads(&p, &arch, &ds1, &batch, 0.0);
        assert_eq!(loss, 0.0);
        assert!(g.row(0, 0).iter().all(|x| *x == 0.0));

        let lambda = 0.3;
        let (_, g) = loss_and_grads(&p, &arch, &ds1, &batch, lambda);
        for (gi, xi) in g.row(0, 0).iter().zip(p.tables[0].row(0)) {
            assert!((gi - lambda * xi).abs() < 1e-15);
        }
        assert!(g.row(0, 1).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn mlp_head_init_shapes() {
        let h = Head::init(PredictorMode::Mlp, 8, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(h.params.len(), 10 * 8 + 21);
    }
}
