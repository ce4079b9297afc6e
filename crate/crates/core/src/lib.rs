//! Reference-free evaluation of multi-party conversation generation.
//!
//! The crate scores a predicted next turn against its recent context (local
//! metrics) and a whole conversation (global metrics) along three axes:
//! speaker modeling, content quality and speaker/content consistency. All
//! semantic judgements go through the oracles in [`providers`], which have
//! deterministic baselines so every score is reproducible for a fixed
//! configuration and seed.
//!
//! The numeric code is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`). The aliases at the crate root fix the scalar to
//! `f64`, which is what the batch runner and the CLI use.

pub mod corpus;
pub mod error;
pub mod global_consistency;
pub mod global_content;
pub mod global_speaker;
pub mod local_consistency;
pub mod local_content;
pub mod local_speaker;
pub mod math;
pub mod providers;
pub mod report;
pub mod scalar;
pub mod text;

pub use corpus::{
    context_window, parse_dataset, parse_profiles, AgendaGraph, AgendaItem, ContextWindow,
    Conversation, Dataset, ItemId, ObjectiveSpec, SpeakerId, SpeakerProfile, Turn, TurnSource,
};
pub use error::{Error, Result};
pub use scalar::Real;

/// Embedding vector with `f64` entries.
pub type Embedding = providers::EmbeddingVector<f64>;
/// Embedding vector with `f32` entries.
pub type Embedding32 = providers::EmbeddingVector<f32>;
/// Topic distribution with `f64` entries.
pub type Topics = providers::TopicDistribution<f64>;
/// Provider bundle evaluating in `f64`.
pub type Providers = providers::ProviderBundle<f64>;
/// Provider bundle evaluating in `f32`.
pub type Providers32 = providers::ProviderBundle<f32>;
/// Speaker centroids with `f64` entries.
pub type Centroids = global_consistency::SpeakerCentroids<f64>;
