//! Toponym resolution against GeoNames-style gazetteers.
//!
//! The pipeline has three moving parts:
//!
//! - [`index::NameIndex`] generates candidates for a mention with a six-tier
//!   sieve (exact, fuzzy, character trigram, token, abbreviation, country
//!   code), keeping only the first tier that matches and ordering the hits by
//!   population.
//! - [`reranker::RerankerModel`] scores the generated candidates with a
//!   two-matrix linear model over lexical, population and feature-type
//!   features, normalized by a softmax.
//! - [`pipeline::Resolver`] composes the two and optionally runs a two-stage
//!   pass over a document, feeding the codes of resolved countries and
//!   administrative divisions back in as context.
//!
//! [`metrics`] and [`corpus`] provide the evaluation harness around it.

pub mod context;
pub mod corpus;
pub mod error;
pub mod gazetteer;
pub mod index;
pub mod metrics;
pub mod pipeline;
pub mod reranker;
pub mod snapshot;
pub mod text;

mod fuzzy;

pub use context::ContextString;
pub use error::{Error, Result};
pub use gazetteer::{FeatureType, GeoEntry, Gazetteer, GazetteerBuilder};
pub use index::{Candidate, Generation, NameIndex, Tier};
pub use pipeline::{ContextMode, ResolutionResult, Resolver};
pub use reranker::{CandidateScorer, RerankInstance, RerankerModel};

/// Default number of candidates kept by the generator.
pub const DEFAULT_K: usize = 20;
