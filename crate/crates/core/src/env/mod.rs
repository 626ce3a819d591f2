//! Reward environments.
//!
//! One `evaluate(set, split)` call stands in for training a multi-output
//! network on the tasks in `set` over one Monte Carlo train/test split and
//! scoring every member task on both metric channels. Three modes exist:
//! a synthetic generator ([`synthetic::SyntheticEnv`]), a replay of recorded
//! results ([`replay::ReplayEnv`]), and a mean-table mode
//! ([`table::TableEnv`]).

pub mod replay;
pub mod synthetic;
pub mod table;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{MetricKind, TaskError, TaskId, TaskSet};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("task {task} is not a member of set {set}")]
    TaskNotInSet { task: TaskId, set: String },
    #[error("reward {value} for task {task} outside [0, 1]")]
    RewardOutOfBounds { task: TaskId, value: f64 },
    #[error("replay has no record for set {set} at split {split}")]
    ReplayMiss { set: String, split: u64 },
    #[error("mean table has no entry for task {task} in set {set}")]
    TableMiss { task: TaskId, set: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Identifier of one Monte Carlo train/test split.
///
/// The simulator never materializes data splits; the id only keys replay
/// records and noise streams. Each round of the bandit game uses a fresh id.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct SplitId(pub u64);

impl fmt::Display for SplitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Result of one training: a reward pair per member task, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub trained_set: TaskSet,
    pub split: SplitId,
    /// `(task, [aupr, auroc])`, ascending by task; exactly the set members.
    pub rewards: Vec<(TaskId, [f64; 2])>,
}

impl Evaluation {
    /// Builds and validates an evaluation; rewards must be given in the
    /// set's ascending member order.
    pub fn new(
        trained_set: TaskSet,
        split: SplitId,
        rewards: Vec<(TaskId, [f64; 2])>,
    ) -> Result<Evaluation, EnvError> {
        trained_set.require_training_set()?;
        let members = trained_set.members();
        if rewards.len() != members.len()
            || rewards.iter().zip(&members).any(|((t, _), m)| t != m)
        {
            return Err(EnvError::Model(format!(
                "rewards cover {:?}, expected exactly the members of {}",
                rewards.iter().map(|(t, _)| t.index()).collect::<Vec<_>>(),
                trained_set.to_key(),
            )));
        }
        for (task, pair) in &rewards {
            for &v in pair {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(EnvError::RewardOutOfBounds {
                        task: *task,
                        value: v,
                    });
                }
            }
        }
        Ok(Evaluation {
            trained_set,
            split,
            rewards,
        })
    }

    pub fn reward(&self, task: TaskId, metric: MetricKind) -> Option<f64> {
        self.rewards
            .iter()
            .find(|(t, _)| *t == task)
            .map(|(_, pair)| pair[metric.index()])
    }
}

/// A reward source. Implementations must be safe for concurrent calls.
pub trait Environment: Send + Sync {
    fn task_count(&self) -> usize;

    fn evaluate(&self, set: TaskSet, split: SplitId) -> Result<Evaluation, EnvError>;
}

/// Environments whose true per-arm means are known (synthetic, table).
pub trait GroundTruth {
    fn true_mean(&self, task: TaskId, set: TaskSet, metric: MetricKind) -> Result<f64, EnvError>;

    fn true_variance(
        &self,
        task: TaskId,
        set: TaskSet,
        metric: MetricKind,
    ) -> Result<f64, EnvError>;
}
