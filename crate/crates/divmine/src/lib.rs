//! Diversity-oriented sample mining for large feature-represented corpora.
//!
//! The crate covers the full pipeline from raw per-sample feature tables to
//! a mined, annotation-ready subset and the statistics used to judge it:
//!
//! * [`dataio`] reads and writes the on-disk tables (features, annotations,
//!   block layouts) and generates synthetic corpora for testing.
//! * [`featprep`] normalizes features per speaker, reduces dimensionality,
//!   and balances feature blocks to equal total variance.
//! * [`metric`] provides the five supported distance functions and condensed
//!   pairwise distance tables.
//! * [`cluster`] implements farthest-first traversal, k-medoids, CLARA,
//!   k-means (plain and bisecting), and agglomerative linkage clustering.
//! * [`select`] picks annotation candidates around cluster medoids under
//!   per-source quotas, plus a random baseline.
//! * [`annostats`] normalizes annotator ratings, aggregates gold-standard
//!   scores, discretizes them, and measures inter-annotator agreement.
//! * [`posthoc`] evaluates mined sets: diversity curves, variance and
//!   rank-sum tests, cluster purity grids.
//! * [`cli`] wires the stages into the `divmine` command-line tool.
//!
//! Every randomized stage takes an explicit seed and produces bit-identical
//! results for identical inputs, independent of thread count.

pub mod annostats;
pub mod cli;
pub mod cluster;
pub mod config;
pub mod dataio;
pub mod error;
pub mod featprep;
pub mod metric;
pub mod posthoc;
pub mod select;

mod ranks;
mod seed;

pub use error::Error;
pub use seed::derive_seed;

/// Shorthand for results carrying [`Error`].
pub type Result<T> = std::result::Result<T, Error>;
