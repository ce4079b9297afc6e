//! Scalar-generic numeric kernels shared by the metric modules.

pub mod divergence;
pub mod mst;
pub mod stats;
pub mod vector;

pub use divergence::{entropy_bits, jensen_shannon_bits};
pub use mst::{minimum_spanning_tree, MstEdge};
pub use stats::{gini, harmonic_mean_step, RunningStats};
pub use vector::{cosine, euclidean, mean_vector, norm, normalized};
