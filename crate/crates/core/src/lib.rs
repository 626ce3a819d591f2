//! Auxiliary-task subset selection via semi-overlapping multi-bandits.
//!
//! The pipeline has three stages:
//!
//! 1. [`transfer`] evaluates the base-case training scenarios over shared
//!    Monte Carlo splits and builds twelve directed transfer graphs
//!    (metric x polarity x edge test).
//! 2. [`candidates`] runs four graph-search heuristics from every root task
//!    over each graph, producing deduplicated candidate auxiliary sets with
//!    provenance.
//! 3. [`bandit`] plays fixed-budget best-arm identification over one bandit
//!    per target task, where arms are the candidate sets containing the
//!    target and arms backed by the same set share every sample.
//!
//! Rewards come from a pluggable [`env::Environment`]: a synthetic
//! generator, a recorded-results replay, or a mean table. [`oracle`]
//! provides exact ground truth on environments with known means.

pub mod bandit;
pub mod candidates;
pub mod env;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod task;
pub mod transfer;

pub use task::{MetricKind, ScenarioKind, TaskId, TaskSet};
