//! Perturbed nearest-neighbor decoding at desk scale.
//!
//! The crate wires a deterministic count-based toy sequence model to a
//! key-value datastore of hidden states, interpolates retrieved-token
//! distributions into the model's own, perturbs the retrieval in three ways
//! (query noise, randomized neighbor subsampling, per-token deduplication),
//! decodes with beam search, diverse beam search, or nucleus sampling, and
//! measures what that does to candidate diversity, quality, and
//! overcorrection.
//!
//! Modules map one-to-one onto the pipeline stages:
//!
//! - [`datastore`]: the `(hidden state, token)` store, exact and
//!   inverted-file search, binary persistence
//! - [`scoring`]: neighbor softmax (sum- and max-aggregated) and linear
//!   interpolation with the base model
//! - [`perturb`]: query noise, adaptive magnitudes, distance statistics,
//!   randomized subsampling
//! - [`toymodel`]: the count model supplying `p_mt` and query vectors
//! - [`corpus`]: the synthetic template corpus generator and TSV format
//! - [`decode`]: the per-step pipeline and the decoders
//! - [`metrics`]: BLEU variants, rank discrepancy, distinct n-grams,
//!   likelihood-gap and fluency aggregates
//! - [`rng`]: counter-based random stream derivation

pub mod corpus;
pub mod datastore;
pub mod decode;
pub mod error;
pub mod metrics;
pub mod perturb;
pub mod rng;
pub mod scoring;
pub mod toymodel;

pub use error::{Error, Result};
