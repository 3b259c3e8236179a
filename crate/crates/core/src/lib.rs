//! Repository activity mining: event ingestion, profile and fingerprint
//! features, a variational recurrent autoencoder for event sequences, and
//! the classification and ablation protocols built on top of them.

pub mod analytics;
pub mod event;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod seqembed;
pub mod store;
pub mod synth;

pub use event::{parse_event_type, CountryLabel, Event, EventType, RepoRecord, Timestamp};
