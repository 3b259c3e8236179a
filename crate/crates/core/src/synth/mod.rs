//! Seeded generator of labeled synthetic corpora in the ingest formats.
//!
//! Each group profile drives a first-order Markov chain over event types,
//! lognormal inter-arrival gaps and metadata, a leader/community/fan actor
//! split, and a description vocabulary.

mod generate;
mod profile;

use thiserror::Error;

pub use generate::{generate_corpus, SynthCorpus, SynthEvent, SynthFiles, SynthRepo};
pub use profile::{
    interpolate_pair, reference_profiles, stationary_distribution, sticky_transition, GroupProfile,
    LogNormalParams,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid request: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
