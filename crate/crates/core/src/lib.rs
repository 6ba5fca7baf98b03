//! Searching interaction functions for collaborative filtering.
//!
//! The crate trains factorization models whose user/item (and, for
//! third-order data, context) embeddings are combined by a learned
//! interaction function, and searches that function with a one-shot
//! proximal algorithm:
//!
//! * [`data`]: rating files, splits, mini-batches
//! * [`ops`]: vector-wise interaction operations and their adjoints
//! * [`transform`]: the element-wise MLP applied to every embedding coordinate
//! * [`prox`]: closed-form proximal steps for the architecture constraints
//! * [`model`]: the relaxed model, predictions and analytic gradients
//! * [`train`]: Adagrad, fixed-architecture training, evaluation
//! * [`search`]: one-shot search, its top-k variant and random search
//! * [`metrics`]: RMSE, Hit@K, NDCG@K
//! * [`synth`]: synthetic data from known interaction functions
//! * [`run`]: run directories and the command implementations behind the CLI

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod prox;
pub mod run;
pub mod search;
pub mod synth;
pub mod train;
pub mod transform;

pub use error::{Error, Result};
