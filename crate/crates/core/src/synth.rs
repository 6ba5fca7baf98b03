//! Synthetic rating data generated from known embeddings and a known
//! interaction function, for checking that training and search recover it.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dims, RatingDataset, RatingRecord};
use crate::error::{Error, Result};
use crate::model::{dot, Matrix};
use crate::ops::{Interaction, OpKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub op: Interaction,
    pub dims: Dims,
    /// Embedding dimension of the generator.
    pub dim: usize,
    /// Number of observed entries.
    pub nnz: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Matrix data with `density` of all cells observed.
    pub fn matrix(op: OpKind, rows: usize, cols: usize, dim: usize, density: f64, noise: f64, seed: u64) -> Self {
        SynthConfig {
            op: op.into(),
            dims: Dims::matrix(rows, cols),
            dim,
            nnz: ((rows * cols) as f64 * density).round() as usize,
            noise,
            seed,
        }
    }
}

/// Everything needed to reproduce and score against the generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    /// Linear read-out weights of the generator (unit norm).
    pub weights: Vec<f64>,
    /// RMSE of the generator's own noiseless predictions: the best any model
    /// can do on these entries.
    pub noise_rmse: f64,
    pub embeddings: Vec<Matrix>,
}

/// Read-out weights for a generator op: uniform for `inner`, plus and the
/// composites; sign-mixed for the remaining pairwise ops. Always unit norm.
fn generator_weights<R: Rng + ?Sized>(op: Interaction, dim: usize, rng: &mut R) -> Vec<f64> {
    let n = op.output_dim(dim);
    let w: Vec<f64> = match op {
        Interaction::Pair(OpKind::Inner | OpKind::Plus) | Interaction::Triple(_) => vec![1.0; n],
        Interaction::Pair(_) => (0..n)
            .map(|_| {
                let mag = rng.random_range(0.5..1.5);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect(),
    };
    let norm = dot(&w, &w).sqrt();
    w.into_iter().map(|x| x / norm).collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<(RatingDataset, GroundTruth)> {
    let sizes = cfg.dims.mode_sizes();
    if cfg.op.arity() != sizes.len() {
        return Err(Error::Config(format!(
            "op '{}' needs order-{} data",
            cfg.op,
            cfg.op.arity()
        )));
    }
    let cells: usize = sizes.iter().product();
    if cfg.nnz == 0 || cfg.nnz > cells {
        return Err(Error::Config(format!("cannot place {} entries in {cells} cells", cfg.nnz)));
    }
    if cfg.dim == 0 || !(cfg.noise >= 0.0) {
        return Err(Error::Config("dim must be positive and noise non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let embeddings: Vec<Matrix> = sizes
        .iter()
        .map(|&n| Matrix::random_normal(n, cfg.dim, 1.0, &mut rng))
        .collect();
    let weights = generator_weights(cfg.op, cfg.dim, &mut rng);
    let noise = Normal::new(0.0, cfg.noise).unwrap();

    let mut seen = HashSet::with_capacity(cfg.nnz);
    let mut records = Vec::with_capacity(cfg.nnz);
    let mut out = vec![0.0; cfg.op.output_dim(cfg.dim)];
    let mut sq_noise = 0.0;
    while records.len() < cfg.nnz {
        let idx: Vec<usize> = sizes.iter().map(|&n| rng.random_range(0..n)).collect();
        if !seen.insert(idx.clone()) {
            continue;
        }
        let inputs: Vec<&[f64]> = idx.iter().enumerate().map(|(m, &i)| embeddings[m].row(i)).collect();
        cfg.op.forward(&inputs, &mut out);
        let eps = if cfg.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        sq_noise += eps * eps;
        let value = dot(&weights, &out) + eps;
        records.push(match idx.len() {
            2 => RatingRecord::matrix(idx[0], idx[1], value),
            _ => RatingRecord::tensor(idx[0], idx[1], idx[2], value),
        });
    }
    let ds = RatingDataset::new(records, cfg.dims)?;
    let truth = GroundTruth {
        config: cfg.clone(),
        weights,
        noise_rmse: (sq_noise / cfg.nnz as f64).sqrt(),
        embeddings,
    };
    Ok((ds, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::TensorOp;

    #[test]
    fn noiseless_values_match_generator() {
        let cfg = SynthConfig::matrix(OpKind::Inner, 20, 10, 3, 0.3, 0.0, 5);
        let (ds, truth) = generate(&cfg).unwrap();
        assert_eq!(ds.len(), 60);
        assert_eq!(truth.noise_rmse, 0.0);
        for r in ds.records() {
            let v = dot(truth.embeddings[0].row(r.row), truth.embeddings[1].row(r.col)) * truth.weights[0];
            assert!((v - r.value).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_floor_is_reported() {
        let cfg = SynthConfig::matrix(OpKind::Plus, 100, 100, 4, 0.5, 0.1, 2);
        let (_, truth) = generate(&cfg).unwrap();
        assert!((truth.noise_rmse - 0.1).abs() < 0.005);
    }

    #[test]
    fn tensor_generation() {
        let cfg = SynthConfig {
            op: Interaction::Triple(TensorOp::new(OpKind::Multiply, OpKind::Multiply).unwrap()),
            dims: Dims::tensor(6, 7, 3),
            dim: 2,
            nnz: 40,
            noise: 0.0,
            seed: 1,
        };
        let (ds, _) = generate(&cfg).unwrap();
        assert_eq!(ds.dims(), Dims::tensor(6, 7, 3));
        assert!(ds.records().iter().all(|r| r.depth.is_some()));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = SynthConfig::matrix(OpKind::Inner, 2, 2, 2, 1.0, 0.0, 1);
        cfg.nnz = 5;
        assert!(generate(&cfg).is_err());
        cfg.nnz = 2;
        cfg.dims = Dims::tensor(2, 2, 2);
        assert!(generate(&cfg).is_err());
    }
}
