//! Geographic location embeddings learned from geotagged tag corpora and
//! structured environmental data.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`corpus`]: ingest tag records, locations, numerical features and
//!   category assignments.
//! - [`geoindex`]: haversine distance and a grid index for radius queries.
//! - [`weighting`]: Gaussian-kernel tag weights and the PPMI association
//!   matrix.
//! - [`selection`]: KL-divergence tag selection with Bayesian smoothing.
//! - [`embed`]: the joint tags / numerical / categorical embedding objective,
//!   trained with Adagrad, plus a GloVe baseline mode.
//! - [`evalkit`]: splits, linear probes, metrics and bag-of-words baselines.
//! - [`synthgen`]: seeded synthetic corpora with planted structure.
//! - [`pipeline`]: the `geoembed` command-line stages and artifacts.
//! - [`docs`]: a fully traced worked example.

pub mod corpus;
pub mod docs;
pub mod embed;
pub mod error;
pub mod evalkit;
pub mod geoindex;
pub mod pipeline;
pub mod selection;
pub mod synthgen;
pub mod weighting;

pub use error::{Error, Result};
