//! Brute-force ground truth for environments with known means: exact best
//! arms, true gaps, true complexity, and exhaustive power-set baselines.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::env::{EnvError, GroundTruth};
use crate::task::{MetricKind, TaskId, TaskSet};

/// True means this close count as tied; a recommendation within the
/// tolerance of the best mean is correct.
pub const TIE_EPSILON: f64 = 1e-12;

/// Exhaustive power-set enumeration is limited to this many tasks
/// (2^(M-1) sets per task).
pub const POWER_SET_TASK_LIMIT: usize = 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "power-set enumeration supports at most {POWER_SET_TASK_LIMIT} tasks, got {0}; \
         use candidate-list mode"
    )]
    PowerSetTooLarge(usize),
    #[error("task {task} has {arms} candidate arm(s); need at least 1")]
    NoArms { task: TaskId, arms: usize },
    #[error("no oracle entry for task {task}")]
    MissingBandit { task: TaskId },
    #[error("set {set} is not an arm of task {task}")]
    UnknownSet { task: TaskId, set: String },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Ground truth for one bandit over its candidate arms.
#[derive(Debug, Clone, Serialize)]
pub struct BanditOracle {
    pub task: TaskId,
    /// Arm sets in ascending set order (the same order the game uses).
    pub arm_sets: Vec<TaskSet>,
    pub arm_means: Vec<f64>,
    pub arm_variances: Vec<f64>,
    /// True gaps: best-vs-second for the best arm, distance to the best for
    /// the rest.
    pub gaps: Vec<f64>,
    pub best_index: usize,
    pub best_mean: f64,
    /// All arms share one true mean (within tolerance).
    pub degenerate: bool,
    /// Best subset over the full power set, when enumerated; ties resolve
    /// toward the smallest, then lexicographically first set.
    pub power_set_best: Option<PowerSetBest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerSetBest {
    pub set: TaskSet,
    pub mean: f64,
}

impl BanditOracle {
    pub fn arm_mean(&self, set: TaskSet) -> Option<f64> {
        self.arm_sets
            .iter()
            .position(|&s| s == set)
            .map(|i| self.arm_means[i])
    }

    /// Smallest gap of the bandit (the best arm's gap).
    pub fn min_gap(&self) -> f64 {
        self.gaps[self.best_index]
    }
}

/// Exact per-bandit ground truth plus the true problem complexity.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub metric: MetricKind,
    pub eps_gap: f64,
    pub bandits: Vec<BanditOracle>,
    /// True complexity: the gap-variance sum evaluated at the true values,
    /// gaps floored at `eps_gap`.
    pub h_sigma: f64,
    /// Every bandit is degenerate.
    pub degenerate: bool,
}

impl OracleReport {
    pub fn bandit(&self, task: TaskId) -> Result<&BanditOracle, OracleError> {
        self.bandits
            .iter()
            .find(|b| b.task == task)
            .ok_or(OracleError::MissingBandit { task })
    }
}

/// One term of the complexity sum; kept separate from the game's estimator
/// so the two routes cross-check each other.
fn complexity_term(std_dev: f64, variance: f64, gap: f64, b: f64) -> f64 {
    let ratio = (std_dev + (variance + 16.0 / 3.0 * b * gap).sqrt()) / gap;
    ratio * ratio
}

/// Computes exact best arms, gaps, and complexity from true means.
///
/// Bandits are built for `targets` (all tasks when `None`) over the
/// candidate sets containing each target. With `include_power_set`, the
/// best subset over all 2^(M-1) sets containing each target is enumerated
/// as well (ties resolved toward the lexicographically smallest set).
pub fn exact_best_arms(
    truth: &dyn GroundTruth,
    m: usize,
    targets: Option<&[TaskId]>,
    candidates: &[TaskSet],
    metric: MetricKind,
    eps_gap: f64,
    include_power_set: bool,
) -> Result<OracleReport, OracleError> {
    if include_power_set && m > POWER_SET_TASK_LIMIT {
        return Err(OracleError::PowerSetTooLarge(m));
    }
    let targets: Vec<TaskId> = match targets {
        Some(ts) => ts.to_vec(),
        None => (0..m).map(TaskId).collect(),
    };
    let mut sorted: Vec<TaskSet> = candidates.to_vec();
    sorted.sort();
    sorted.dedup();

    let mut bandits = Vec::with_capacity(targets.len());
    let mut h_sigma = 0.0;
    for &task in &targets {
        let arm_sets: Vec<TaskSet> = sorted
            .iter()
            .copied()
            .filter(|s| s.contains(task))
            .collect();
        if arm_sets.is_empty() {
            return Err(OracleError::NoArms { task, arms: 0 });
        }
        let arm_means: Vec<f64> = arm_sets
            .iter()
            .map(|&s| truth.true_mean(task, s, metric))
            .collect::<Result<_, _>>()?;
        let arm_variances: Vec<f64> = arm_sets
            .iter()
            .map(|&s| truth.true_variance(task, s, metric))
            .collect::<Result<_, _>>()?;

        let best_index = arm_means
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.partial_cmp(b).unwrap().then(j.cmp(i)))
            .map(|(i, _)| i)
            .unwrap();
        let best_mean = arm_means[best_index];
        let second_best = arm_means
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best_index)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let gaps: Vec<f64> = arm_means
            .iter()
            .enumerate()
            .map(|(i, &mu)| {
                if i == best_index && second_best > f64::NEG_INFINITY {
                    (best_mean - second_best).abs()
                } else {
                    (best_mean - mu).abs()
                }
            })
            .collect();
        let degenerate = arm_means
            .iter()
            .all(|&mu| (mu - best_mean).abs() <= TIE_EPSILON);

        if arm_sets.len() >= 2 {
            for (i, &gap) in gaps.iter().enumerate() {
                h_sigma += complexity_term(
                    arm_variances[i].sqrt(),
                    arm_variances[i],
                    gap.max(eps_gap),
                    1.0,
                );
            }
        }

        let power_set_best = if include_power_set {
            Some(enumerate_power_set_best(truth, m, task, metric)?)
        } else {
            None
        };

        bandits.push(BanditOracle {
            task,
            arm_sets,
            arm_means,
            arm_variances,
            gaps,
            best_index,
            best_mean,
            degenerate,
            power_set_best,
        });
    }

    let degenerate = bandits.iter().all(|b| b.degenerate);
    Ok(OracleReport {
        metric,
        eps_gap,
        bandits,
        h_sigma,
        degenerate,
    })
}

fn enumerate_power_set_best(
    truth: &dyn GroundTruth,
    m: usize,
    task: TaskId,
    metric: MetricKind,
) -> Result<PowerSetBest, OracleError> {
    let task_bit = 1u64 << task.index();
    let mut best: Option<PowerSetBest> = None;
    for mask in 0u64..(1u64 << m) {
        if mask & task_bit == 0 {
            continue;
        }
        let set = TaskSet::from_bits(mask);
        let mean = truth.true_mean(task, set, metric)?;
        // ties resolve toward the smallest set, then lexicographically
        let replace = match &best {
            None => true,
            Some(b) => {
                mean > b.mean + TIE_EPSILON
                    || ((mean - b.mean).abs() <= TIE_EPSILON
                        && (set.len() < b.set.len()
                            || (set.len() == b.set.len() && set < b.set)))
            }
        };
        if replace {
            best = Some(PowerSetBest { set, mean });
        }
    }
    Ok(best.expect("at least the singleton exists"))
}

/// Per-task regret of a recommendation against the oracle.
#[derive(Debug, Clone, Serialize)]
pub struct RegretRow {
    pub task: TaskId,
    pub recommended: TaskSet,
    pub regret: f64,
    pub correct: bool,
}

/// True simple regret of final recommendations; ties with the best mean
/// count as correct.
pub fn true_simple_regret(
    report: &OracleReport,
    recommendations: &BTreeMap<TaskId, TaskSet>,
) -> Result<Vec<RegretRow>, OracleError> {
    let mut rows = Vec::with_capacity(recommendations.len());
    for (&task, &set) in recommendations {
        let bandit = report.bandit(task)?;
        let mean = bandit.arm_mean(set).ok_or_else(|| OracleError::UnknownSet {
            task,
            set: set.to_key(),
        })?;
        let regret = (bandit.best_mean - mean).max(0.0);
        rows.push(RegretRow {
            task,
            recommended: set,
            regret,
            correct: regret <= TIE_EPSILON,
        });
    }
    Ok(rows)
}
