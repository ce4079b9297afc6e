//! Batch evaluation: run configuration, per-conversation scoring, dataset
//! aggregation and the synthetic conversation generator.

mod aggregate;
mod config;
mod evaluate;
pub mod synth;

pub use aggregate::{aggregate_metrics, Aggregate};
pub use config::{OutputFormat, OutputSpec, RunConfig, Suites};
pub use evaluate::{evaluate, evaluate_datasets, names, ConversationError, ConversationScores, EvalOptions, MetricReport};
pub use synth::{gen_dataset, gen_synthetic, AgendaWalk, SynthSpec};
