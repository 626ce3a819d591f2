//! Stage 3: best-arm identification over semi-overlapping multi-bandits.
//!
//! Each target task owns a bandit whose arms are the candidate sets
//! containing that task. Arms of different bandits backed by the same set
//! are semi-overlapping: one pull trains the set once (one round of budget)
//! and every bandit holding that set receives its own target-specific
//! reward sample. Pull counts of such arms stay equal for the whole game.
//!
//! Selection uses the adaptive gap-plus-variance index
//!
//! ```text
//! B_mk(t) = -gap_mk(t) + sqrt(2 a(t) var_mk(t) / T_mk(t))
//!           + 7 a(t) b / (3 T_mk(t))
//! a(t) = c n / H(t)
//! H(t) = sum_mk ((sd_mk + sqrt(var_mk + (16/3) b gap~_mk)) / gap~_mk)^2
//! ```
//!
//! with `gap~` floored at `eps_gap`, `b` the reward range bound, and the
//! per-arm variance the unbiased (T-1 divisor) estimate.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{Candidate, SearchMethod};
use crate::env::{EnvError, Environment, SplitId};
use crate::oracle::OracleReport;
use crate::stats::SampleStats;
use crate::task::{scenario_memberships, MetricKind, ScenarioKind, TaskId, TaskSet};

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("target task {task} has {arms} arm(s); every target needs at least 2")]
    TooFewArms { task: TaskId, arms: usize },
    #[error("budget {budget} is below the initialization minimum {minimum} (2 pulls per unique set)")]
    BudgetBelowMinimum { budget: u64, minimum: u64 },
    #[error("no target tasks configured")]
    NoTargets,
    #[error("target task {0} out of range")]
    TargetOutOfRange(TaskId),
    #[error("duplicate arm set {0} in specification")]
    DuplicateSet(String),
    #[error("arm set {set} does not contain target {task}")]
    SetMissingTarget { set: String, task: TaskId },
    #[error("budget exhausted after round {0}")]
    GameOver(u64),
    #[error("game not finished: round {t} of {budget}")]
    NotFinished { t: u64, budget: u64 },
    #[error("arm ({bandit}, {arm}) has no samples yet")]
    UnpulledArm { bandit: TaskId, arm: usize },
    #[error("environment failed on set {set}: {source}")]
    Environment { set: String, source: EnvError },
}

/// Constants of the adaptive gap index.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgapeConfig {
    /// Exploration scale multiplier in `a(t) = c n / H(t)`.
    pub c: f64,
    /// Floor applied to gap estimates inside the complexity sum.
    pub eps_gap: f64,
    /// Reward range bound b (rewards live in [0, 1]).
    pub b: f64,
}

impl Default for AgapeConfig {
    fn default() -> Self {
        AgapeConfig {
            c: 0.5,
            eps_gap: 1e-3,
            b: 1.0,
        }
    }
}

/// Arm-selection policy for the game loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Adaptive gap-plus-variance index.
    AdaptiveGapE,
    /// Round-robin over all arms; the fan-out accounting is unchanged.
    UniformArms,
}

/// Origin tag of a candidate set, for pull breakdowns by type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TypeTag {
    Search(SearchMethod),
    Scenario(ScenarioKind),
}

impl TypeTag {
    pub const ALL: [TypeTag; 8] = [
        TypeTag::Search(SearchMethod::Neighbours),
        TypeTag::Search(SearchMethod::Transitive),
        TypeTag::Search(SearchMethod::FilteredTransitive),
        TypeTag::Search(SearchMethod::Clique),
        TypeTag::Scenario(ScenarioKind::Stl),
        TypeTag::Scenario(ScenarioKind::Pw),
        TypeTag::Scenario(ScenarioKind::Fmtl),
        TypeTag::Scenario(ScenarioKind::Loo),
    ];
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Search(s) => write!(f, "{s}"),
            TypeTag::Scenario(s) => write!(f, "{s}"),
        }
    }
}

/// One arm set offered to the multi-bandit, with its origin tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmSpec {
    pub set: TaskSet,
    pub types: Vec<TypeTag>,
}

impl ArmSpec {
    pub fn untyped(set: TaskSet) -> ArmSpec {
        ArmSpec {
            set,
            types: Vec::new(),
        }
    }
}

/// Converts stage-2 candidates into arm specs (one tag per search method in
/// the provenance).
pub fn specs_from_candidates(candidates: &[Candidate]) -> Vec<ArmSpec> {
    candidates
        .iter()
        .map(|c| {
            let mut types: Vec<TypeTag> =
                c.provenance.iter().map(|p| TypeTag::Search(p.search)).collect();
            types.sort();
            types.dedup();
            ArmSpec { set: c.set, types }
        })
        .collect()
}

/// Adds the base-case scenario sets as additional arms, merging tags where a
/// set is already a candidate.
pub fn augment_with_base_cases(mut specs: Vec<ArmSpec>, m: usize) -> Vec<ArmSpec> {
    let mut by_set: BTreeMap<TaskSet, usize> =
        specs.iter().enumerate().map(|(i, s)| (s.set, i)).collect();
    for set in crate::task::base_case_sets(m).expect("valid task count") {
        let tags: Vec<TypeTag> = scenario_memberships(set, m)
            .into_iter()
            .map(TypeTag::Scenario)
            .collect();
        match by_set.get(&set) {
            Some(&i) => {
                specs[i].types.extend(tags);
                specs[i].types.sort();
                specs[i].types.dedup();
            }
            None => {
                by_set.insert(set, specs.len());
                specs.push(ArmSpec { set, types: tags });
            }
        }
    }
    specs.sort_by_key(|s| s.set);
    specs
}

/// Reference to an arm: the bandit's task, the arm's index within that
/// bandit, and the backing set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArmRef {
    pub bandit: TaskId,
    pub arm_index: usize,
    pub set: TaskSet,
}

/// Running statistics of one arm.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ArmStats {
    stats: SampleStats,
    own_pulls: u64,
    induced_pulls: u64,
}

impl ArmStats {
    pub fn pulls(&self) -> u64 {
        self.own_pulls + self.induced_pulls
    }

    pub fn own_pulls(&self) -> u64 {
        self.own_pulls
    }

    pub fn induced_pulls(&self) -> u64 {
        self.induced_pulls
    }

    pub fn mean(&self) -> f64 {
        self.stats.mean()
    }

    /// Unbiased sample variance (T-1 divisor); 0 before two samples.
    pub fn variance(&self) -> f64 {
        self.stats.variance().unwrap_or(0.0)
    }

    fn update(&mut self, reward: f64, own: bool) {
        self.stats.push(reward).expect("rewards are finite");
        if own {
            self.own_pulls += 1;
        } else {
            self.induced_pulls += 1;
        }
        debug_assert_eq!(self.stats.count(), self.pulls());
    }
}

#[derive(Debug, Clone)]
struct Arm {
    set: TaskSet,
    stats: ArmStats,
}

#[derive(Debug, Clone)]
struct Bandit {
    task: TaskId,
    arms: Vec<Arm>,
}

/// One row of the JSON-lines round log.
#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    /// 1-based round index after this pull.
    pub t: u64,
    /// Initiating bandit's task.
    pub bandit: usize,
    /// Initiating arm index within its bandit.
    pub arm: usize,
    pub set: TaskSet,
    pub split: u64,
    /// Full evaluation: both metric channels per member task.
    pub rewards: Vec<RewardEntry>,
    /// Every arm that received a sample this round.
    pub fanout: Vec<FanoutEntry>,
    /// Index value of the chosen arm (absent for initialization and
    /// uniform-policy rounds).
    pub b_index: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RewardEntry {
    pub task: usize,
    pub aupr: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FanoutEntry {
    pub bandit: usize,
    pub arm: usize,
    pub reward: f64,
}

/// The multi-bandit game state.
#[derive(Debug, Clone)]
pub struct MultiBandit {
    m: usize,
    metric: MetricKind,
    budget: u64,
    config: AgapeConfig,
    check_invariants: bool,
    bandits: Vec<Bandit>,
    /// unique set -> arms backed by it, in (bandit, arm) order
    fanout: BTreeMap<TaskSet, Vec<(usize, usize)>>,
    unique_sets: Vec<TaskSet>,
    set_types: BTreeMap<TaskSet, Vec<TypeTag>>,
    /// specs that contain no target task and therefore have no arm
    ignored_sets: Vec<TaskSet>,
    t: u64,
    total_delivered: u64,
    violations: u64,
}

impl MultiBandit {
    /// Builds the game over `specs`. Bandits exist for `targets` (all tasks
    /// when `None`); each target needs at least two arms, and the budget
    /// must cover two initialization pulls per unique set.
    pub fn new(
        specs: &[ArmSpec],
        m: usize,
        targets: Option<&[TaskId]>,
        budget: u64,
        metric: MetricKind,
        config: AgapeConfig,
        check_invariants: bool,
    ) -> Result<MultiBandit, BanditError> {
        let targets: Vec<TaskId> = match targets {
            Some(ts) => {
                let mut ts = ts.to_vec();
                ts.sort();
                ts.dedup();
                ts
            }
            None => (0..m).map(TaskId).collect(),
        };
        if targets.is_empty() {
            return Err(BanditError::NoTargets);
        }
        if let Some(&bad) = targets.iter().find(|t| t.index() >= m) {
            return Err(BanditError::TargetOutOfRange(bad));
        }

        let mut sorted_specs = specs.to_vec();
        sorted_specs.sort_by_key(|s| s.set);
        for pair in sorted_specs.windows(2) {
            if pair[0].set == pair[1].set {
                return Err(BanditError::DuplicateSet(pair[0].set.to_key()));
            }
        }

        let mut bandits: Vec<Bandit> = targets
            .iter()
            .map(|&task| Bandit {
                task,
                arms: Vec::new(),
            })
            .collect();
        let mut fanout: BTreeMap<TaskSet, Vec<(usize, usize)>> = BTreeMap::new();
        let mut unique_sets = Vec::new();
        let mut ignored_sets = Vec::new();
        let mut set_types = BTreeMap::new();
        for spec in &sorted_specs {
            let mut holders = Vec::new();
            for (b_idx, bandit) in bandits.iter_mut().enumerate() {
                if spec.set.contains(bandit.task) {
                    holders.push((b_idx, bandit.arms.len()));
                    bandit.arms.push(Arm {
                        set: spec.set,
                        stats: ArmStats::default(),
                    });
                }
            }
            if holders.is_empty() {
                ignored_sets.push(spec.set);
            } else {
                unique_sets.push(spec.set);
                fanout.insert(spec.set, holders);
                let mut types = spec.types.clone();
                types.sort();
                types.dedup();
                set_types.insert(spec.set, types);
            }
        }

        for bandit in &bandits {
            if bandit.arms.len() < 2 {
                return Err(BanditError::TooFewArms {
                    task: bandit.task,
                    arms: bandit.arms.len(),
                });
            }
        }
        let minimum = 2 * unique_sets.len() as u64;
        if budget < minimum {
            return Err(BanditError::BudgetBelowMinimum { budget, minimum });
        }

        Ok(MultiBandit {
            m,
            metric,
            budget,
            config,
            check_invariants,
            bandits,
            fanout,
            unique_sets,
            set_types,
            ignored_sets,
            t: 0,
            total_delivered: 0,
            violations: 0,
        })
    }

    pub fn task_count(&self) -> usize {
        self.m
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn unique_sets(&self) -> &[TaskSet] {
        &self.unique_sets
    }

    pub fn ignored_sets(&self) -> &[TaskSet] {
        &self.ignored_sets
    }

    /// Rounds consumed by initialization: two per unique set.
    pub fn init_rounds(&self) -> u64 {
        2 * self.unique_sets.len() as u64
    }

    /// Total samples delivered so far (own plus induced, all arms).
    pub fn total_delivered(&self) -> u64 {
        self.total_delivered
    }

    /// Same-set pull-count violations seen by the invariant checker.
    pub fn violations(&self) -> u64 {
        self.violations
    }

    pub fn targets(&self) -> Vec<TaskId> {
        self.bandits.iter().map(|b| b.task).collect()
    }

    pub fn arm_count(&self, bandit: usize) -> usize {
        self.bandits[bandit].arms.len()
    }

    pub fn total_arms(&self) -> usize {
        self.bandits.iter().map(|b| b.arms.len()).sum()
    }

    pub fn arm_set(&self, bandit: usize, arm: usize) -> TaskSet {
        self.bandits[bandit].arms[arm].set
    }

    pub fn arm_sets(&self, bandit: usize) -> Vec<TaskSet> {
        self.bandits[bandit].arms.iter().map(|a| a.set).collect()
    }

    pub fn arm_stats(&self, bandit: usize, arm: usize) -> &ArmStats {
        &self.bandits[bandit].arms[arm].stats
    }

    fn arm_ref(&self, bandit: usize, arm: usize) -> ArmRef {
        ArmRef {
            bandit: self.bandits[bandit].task,
            arm_index: arm,
            set: self.bandits[bandit].arms[arm].set,
        }
    }

    fn require_all_pulled(&self) -> Result<(), BanditError> {
        for (b_idx, bandit) in self.bandits.iter().enumerate() {
            for (a_idx, arm) in bandit.arms.iter().enumerate() {
                if arm.stats.pulls() == 0 {
                    return Err(BanditError::UnpulledArm {
                        bandit: self.bandits[b_idx].task,
                        arm: a_idx,
                    });
                }
            }
        }
        Ok(())
    }

    /// Highest and second-highest arm means of one bandit.
    fn top_two(&self, bandit: usize) -> (usize, f64, f64) {
        let arms = &self.bandits[bandit].arms;
        let mut best_idx = 0;
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for (k, arm) in arms.iter().enumerate() {
            let mu = arm.stats.mean();
            if mu > best {
                second = best;
                best = mu;
                best_idx = k;
            } else if mu > second {
                second = mu;
            }
        }
        (best_idx, best, second)
    }

    fn gap_from_top(top: (usize, f64, f64), arm: usize, mean: f64) -> f64 {
        let (best_idx, best, second) = top;
        if arm == best_idx {
            (second - mean).abs()
        } else {
            (best - mean).abs()
        }
    }

    /// Empirical gap of arm `(bandit, arm)`:
    /// `|max_{j != k} mean_j - mean_k|`.
    pub fn gap_estimate(&self, bandit: usize, arm: usize) -> Result<f64, BanditError> {
        self.require_all_pulled()?;
        Ok(self.gap_unchecked(bandit, arm))
    }

    fn gap_unchecked(&self, bandit: usize, arm: usize) -> f64 {
        let mean = self.bandits[bandit].arms[arm].stats.mean();
        Self::gap_from_top(self.top_two(bandit), arm, mean)
    }

    /// Plug-in complexity estimate over all arms, with the gap floored at
    /// `eps_gap`.
    pub fn complexity_estimate(&self) -> f64 {
        let groups: Vec<Vec<(f64, f64)>> = self
            .bandits
            .iter()
            .map(|b| {
                b.arms
                    .iter()
                    .map(|a| (a.stats.mean(), a.stats.variance()))
                    .collect()
            })
            .collect();
        plug_in_complexity(&groups, self.config.eps_gap, self.config.b)
    }

    /// The selection index of one arm given exploration scale `a`.
    pub fn b_index(&self, bandit: usize, arm: usize, a: f64) -> f64 {
        let stats = &self.bandits[bandit].arms[arm].stats;
        let t = stats.pulls() as f64;
        -self.gap_unchecked(bandit, arm)
            + (2.0 * a * stats.variance() / t).sqrt()
            + 7.0 * a * self.config.b / (3.0 * t)
    }

    /// Picks the next arm under the adaptive index. Ties break toward the
    /// fewest pulls, then the lowest bandit, then the lowest arm index.
    pub fn select_pull(&self) -> Result<(ArmRef, f64), BanditError> {
        if self.t >= self.budget {
            return Err(BanditError::GameOver(self.t));
        }
        self.require_all_pulled()?;
        let a = self.config.c * self.budget as f64 / self.complexity_estimate();
        let mut best: Option<(f64, u64, usize, usize)> = None;
        for (b_idx, bandit) in self.bandits.iter().enumerate() {
            let top = self.top_two(b_idx);
            for (a_idx, arm) in bandit.arms.iter().enumerate() {
                let t = arm.stats.pulls() as f64;
                let gap = Self::gap_from_top(top, a_idx, arm.stats.mean());
                let b = -gap
                    + (2.0 * a * arm.stats.variance() / t).sqrt()
                    + 7.0 * a * self.config.b / (3.0 * t);
                let pulls = arm.stats.pulls();
                let better = match &best {
                    None => true,
                    Some((bb, bp, _, _)) => b > *bb || (b == *bb && pulls < *bp),
                };
                if better {
                    best = Some((b, pulls, b_idx, a_idx));
                }
            }
        }
        let (b, _, b_idx, a_idx) = best.expect("at least one arm");
        Ok((self.arm_ref(b_idx, a_idx), b))
    }

    /// Uniform baseline: cycles through all arms in (bandit, arm) order.
    pub fn select_uniform(&self) -> Result<ArmRef, BanditError> {
        if self.t >= self.budget {
            return Err(BanditError::GameOver(self.t));
        }
        let total = self.total_arms() as u64;
        let idx = (self.t.saturating_sub(self.init_rounds()) % total) as usize;
        let mut skip = idx;
        for (b_idx, bandit) in self.bandits.iter().enumerate() {
            if skip < bandit.arms.len() {
                return Ok(self.arm_ref(b_idx, skip));
            }
            skip -= bandit.arms.len();
        }
        unreachable!("index within total arm count");
    }

    /// Trains the referenced arm's set on a fresh split and fans the sample
    /// out to every arm backed by the same set. On environment failure the
    /// state is unchanged.
    pub fn apply_pull(
        &mut self,
        arm: ArmRef,
        env: &dyn Environment,
        b_index: Option<f64>,
    ) -> Result<RoundRecord, BanditError> {
        if self.t >= self.budget {
            return Err(BanditError::GameOver(self.t));
        }
        let split = SplitId(self.t);
        let evaluation =
            env.evaluate(arm.set, split)
                .map_err(|source| BanditError::Environment {
                    set: arm.set.to_key(),
                    source,
                })?;

        let holders = self.fanout.get(&arm.set).expect("known set").clone();
        let mut fanout_log = Vec::with_capacity(holders.len());
        for (b_idx, a_idx) in holders {
            let task = self.bandits[b_idx].task;
            let reward = evaluation
                .reward(task, self.metric)
                .expect("fan-out task is a member of the trained set");
            let own = task == arm.bandit && a_idx == arm.arm_index;
            self.bandits[b_idx].arms[a_idx].stats.update(reward, own);
            self.total_delivered += 1;
            fanout_log.push(FanoutEntry {
                bandit: task.index(),
                arm: a_idx,
                reward,
            });
        }
        self.t += 1;

        if self.check_invariants {
            self.violations += self.count_pull_mismatches();
        }

        Ok(RoundRecord {
            t: self.t,
            bandit: arm.bandit.index(),
            arm: arm.arm_index,
            set: arm.set,
            split: split.0,
            rewards: evaluation
                .rewards
                .iter()
                .map(|(task, pair)| RewardEntry {
                    task: task.index(),
                    aupr: pair[0],
                    auroc: pair[1],
                })
                .collect(),
            fanout: fanout_log,
            b_index,
        })
    }

    fn count_pull_mismatches(&self) -> u64 {
        let mut bad = 0;
        for holders in self.fanout.values() {
            let mut counts = holders
                .iter()
                .map(|&(b, a)| self.bandits[b].arms[a].stats.pulls());
            if let Some(first) = counts.next() {
                bad += counts.filter(|&c| c != first).count() as u64;
            }
        }
        bad
    }

    /// Pulls every unique set twice, fanning out normally. Consumes
    /// `2 * unique_sets` rounds; the initiating arm of each pull belongs to
    /// the lowest-task bandit holding the set.
    pub fn initialize(&mut self, env: &dyn Environment) -> Result<Vec<RoundRecord>, BanditError> {
        let mut records = Vec::with_capacity(self.init_rounds() as usize);
        for _pass in 0..2 {
            for set in self.unique_sets.clone() {
                let &(b_idx, a_idx) = self
                    .fanout
                    .get(&set)
                    .and_then(|h| h.first())
                    .expect("unique sets have holders");
                let arm = self.arm_ref(b_idx, a_idx);
                records.push(self.apply_pull(arm, env, None)?);
            }
        }
        Ok(records)
    }

    /// Runs initialization (if not done) and plays rounds until the budget
    /// is exhausted, discarding round records.
    pub fn run_to_budget(
        &mut self,
        env: &dyn Environment,
        policy: Policy,
    ) -> Result<(), BanditError> {
        if self.t == 0 {
            self.initialize(env)?;
        }
        while self.t < self.budget {
            let (arm, b) = match policy {
                Policy::AdaptiveGapE => {
                    let (arm, b) = self.select_pull()?;
                    (arm, Some(b))
                }
                Policy::UniformArms => (self.select_uniform()?, None),
            };
            self.apply_pull(arm, env, b)?;
        }
        Ok(())
    }

    /// Index of the current empirical-best arm of a bandit: highest mean,
    /// ties to the most-pulled then lowest index.
    pub fn best_arm_index(&self, bandit: usize) -> usize {
        let arms = &self.bandits[bandit].arms;
        let mut best = 0;
        for k in 1..arms.len() {
            let (mk, mb) = (arms[k].stats.mean(), arms[best].stats.mean());
            let (pk, pb) = (arms[k].stats.pulls(), arms[best].stats.pulls());
            if mk > mb || (mk == mb && pk > pb) {
                best = k;
            }
        }
        best
    }

    /// Final recommendation per target task. Errors before the budget is
    /// spent.
    pub fn recommend(&self) -> Result<BTreeMap<TaskId, TaskSet>, BanditError> {
        if self.t < self.budget {
            return Err(BanditError::NotFinished {
                t: self.t,
                budget: self.budget,
            });
        }
        Ok(self
            .bandits
            .iter()
            .enumerate()
            .map(|(b_idx, b)| (b.task, b.arms[self.best_arm_index(b_idx)].set))
            .collect())
    }

    /// Point-in-time metrics; regret and correctness columns appear when an
    /// oracle report over the same arm sets is supplied.
    pub fn metrics_snapshot(&self, oracle: Option<&OracleReport>) -> RoundMetrics {
        let mut bandits = Vec::with_capacity(self.bandits.len());
        let mut any_wrong = oracle.map(|_| false);
        for (b_idx, bandit) in self.bandits.iter().enumerate() {
            let best = self.best_arm_index(b_idx);
            let recommended_set = bandit.arms[best].set;
            let mut own = 0;
            let mut induced = 0;
            for arm in &bandit.arms {
                own += arm.stats.own_pulls();
                induced += arm.stats.induced_pulls();
            }

            let (simple_regret, correct) = match oracle {
                None => (None, None),
                Some(report) => {
                    let ob = report
                        .bandits
                        .iter()
                        .find(|ob| ob.task == bandit.task)
                        .expect("oracle covers every target");
                    let true_mean = ob
                        .arm_mean(recommended_set)
                        .expect("oracle covers every arm set");
                    let regret = ob.best_mean - true_mean;
                    let ok = regret <= crate::oracle::TIE_EPSILON;
                    if !ok {
                        any_wrong = Some(true);
                    }
                    (Some(regret.max(0.0)), Some(ok))
                }
            };

            let mut type_pulls = Vec::new();
            for tag in TypeTag::ALL {
                let mut count = 0u64;
                let mut own_t = 0u64;
                let mut induced_t = 0u64;
                for arm in &bandit.arms {
                    if self.set_types[&arm.set].contains(&tag) {
                        count += 1;
                        own_t += arm.stats.own_pulls();
                        induced_t += arm.stats.induced_pulls();
                    }
                }
                if count > 0 {
                    type_pulls.push(TypePulls {
                        tag: tag.to_string(),
                        candidate_count: count,
                        own_pulls: own_t,
                        induced_pulls: induced_t,
                        own_normalized: own_t as f64 / count as f64,
                        induced_normalized: induced_t as f64 / count as f64,
                    });
                }
            }

            bandits.push(BanditMetrics {
                task: bandit.task.index(),
                recommended_set,
                recommended_index: best,
                own_pulls: own,
                induced_pulls: induced,
                own_on_best: bandit.arms[best].stats.own_pulls(),
                induced_on_best: bandit.arms[best].stats.induced_pulls(),
                simple_regret,
                correct,
                type_pulls,
            });
        }
        RoundMetrics {
            t: self.t,
            bandits,
            any_error: any_wrong,
        }
    }
}

/// Snapshot of the game at one round.
#[derive(Debug, Clone, Serialize)]
pub struct RoundMetrics {
    pub t: u64,
    pub bandits: Vec<BanditMetrics>,
    /// Whether any bandit's current recommendation is wrong (oracle runs
    /// only).
    pub any_error: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BanditMetrics {
    pub task: usize,
    pub recommended_set: TaskSet,
    pub recommended_index: usize,
    pub own_pulls: u64,
    pub induced_pulls: u64,
    pub own_on_best: u64,
    pub induced_on_best: u64,
    pub simple_regret: Option<f64>,
    pub correct: Option<bool>,
    pub type_pulls: Vec<TypePulls>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TypePulls {
    pub tag: String,
    pub candidate_count: u64,
    pub own_pulls: u64,
    pub induced_pulls: u64,
    pub own_normalized: f64,
    pub induced_normalized: f64,
}

/// The plug-in complexity formula evaluated on explicit per-arm
/// `(mean, variance)` pairs, grouped by bandit. Gaps are computed within
/// each group and floored at `eps_gap`; groups with fewer than two arms are
/// skipped (their gap is undefined).
pub fn plug_in_complexity(bandit_arms: &[Vec<(f64, f64)>], eps_gap: f64, b: f64) -> f64 {
    let mut h = 0.0;
    for arms in bandit_arms {
        if arms.len() < 2 {
            continue;
        }
        let mut best_idx = 0;
        let mut best = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for (k, &(mean, _)) in arms.iter().enumerate() {
            if mean > best {
                second = best;
                best = mean;
                best_idx = k;
            } else if mean > second {
                second = mean;
            }
        }
        for (k, &(mean, var)) in arms.iter().enumerate() {
            let raw_gap = if k == best_idx {
                (second - mean).abs()
            } else {
                (best - mean).abs()
            };
            let gap = raw_gap.max(eps_gap);
            let term = (var.sqrt() + (var + 16.0 / 3.0 * b * gap).sqrt()) / gap;
            h += term * term;
        }
    }
    h
}

/// Own-to-induced pull ratio formatted as a percentage with two decimals,
/// as in the per-task pull tables.
pub fn own_induced_ratio_percent(own: u64, induced: u64) -> String {
    if induced == 0 {
        return "n/a".to_string();
    }
    format!("{:.2}%", 100.0 * own as f64 / induced as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::synthetic::{SyntheticEnv, SyntheticModel};

    fn set(ids: &[usize], m: usize) -> TaskSet {
        TaskSet::from_ids(ids.iter().copied(), m).unwrap()
    }

    fn specs(sets: &[TaskSet]) -> Vec<ArmSpec> {
        sets.iter().map(|&s| ArmSpec::untyped(s)).collect()
    }

    fn m2_game(budget: u64) -> MultiBandit {
        let sets = [set(&[0], 2), set(&[1], 2), set(&[0, 1], 2)];
        MultiBandit::new(
            &specs(&sets),
            2,
            None,
            budget,
            MetricKind::Aupr,
            AgapeConfig::default(),
            true,
        )
        .unwrap()
    }

    #[test]
    fn arms_are_candidates_containing_the_task() {
        let game = m2_game(10);
        assert_eq!(game.arm_sets(0), vec![set(&[0], 2), set(&[0, 1], 2)]);
        assert_eq!(game.arm_sets(1), vec![set(&[0, 1], 2), set(&[1], 2)]);
    }

    #[test]
    fn too_few_arms_names_the_task() {
        let sets = [set(&[0], 2), set(&[0, 1], 2)];
        match MultiBandit::new(
            &specs(&sets),
            2,
            None,
            10,
            MetricKind::Aupr,
            AgapeConfig::default(),
            false,
        ) {
            Err(BanditError::TooFewArms { task, arms }) => {
                assert_eq!(task, TaskId(1));
                assert_eq!(arms, 1);
            }
            other => panic!("expected TooFewArms, got {other:?}"),
        }
    }

    #[test]
    fn budget_minimum_is_twice_unique_sets() {
        let sets = [set(&[0], 2), set(&[1], 2), set(&[0, 1], 2)];
        match MultiBandit::new(
            &specs(&sets),
            2,
            None,
            5,
            MetricKind::Aupr,
            AgapeConfig::default(),
            false,
        ) {
            Err(BanditError::BudgetBelowMinimum { minimum, .. }) => assert_eq!(minimum, 6),
            other => panic!("expected BudgetBelowMinimum, got {other:?}"),
        }
    }

    #[test]
    fn initialization_pulls_each_set_twice_with_fanout() {
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.4, 0.6], 150.0), 1).unwrap();
        let mut game = m2_game(10);
        let records = game.initialize(&env).unwrap();
        assert_eq!(records.len(), 6);
        assert_eq!(game.round(), 6);
        for b in 0..2 {
            for a in 0..2 {
                assert_eq!(game.arm_stats(b, a).pulls(), 2);
            }
        }
        // the shared pair delivered two samples per round
        assert_eq!(game.total_delivered(), 2 * (1 + 1 + 2));
        assert_eq!(game.violations(), 0);
    }

    #[test]
    fn gap_estimates_from_fixed_means() {
        // three arms with means 0.5 / 0.7 / 0.9 -> gaps 0.4 / 0.2 / 0.2
        let sets = [set(&[0], 4), set(&[0, 1], 4), set(&[0, 2], 4), set(&[1], 4), set(&[1, 2], 4)];
        let mut game = MultiBandit::new(
            &specs(&sets),
            4,
            Some(&[TaskId(0)]),
            20,
            MetricKind::Aupr,
            AgapeConfig::default(),
            false,
        )
        .unwrap();
        // feed two deterministic samples per arm
        for (arm, mean) in [(0, 0.5), (1, 0.7), (2, 0.9)] {
            game.bandits[0].arms[arm].stats.update(mean, true);
            game.bandits[0].arms[arm].stats.update(mean, false);
        }
        assert!((game.gap_estimate(0, 0).unwrap() - 0.4).abs() < 1e-15);
        assert!((game.gap_estimate(0, 1).unwrap() - 0.2).abs() < 1e-15);
        assert!((game.gap_estimate(0, 2).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gap_requires_pulled_arms() {
        let game = m2_game(10);
        assert!(matches!(
            game.gap_estimate(0, 0),
            Err(BanditError::UnpulledArm { .. })
        ));
    }

    #[test]
    fn complexity_floor_formula() {
        // all arms identical: gaps at the floor, variances 0 after equal
        // samples -> H = arms * (16/3) / eps
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.5, 0.5], 1e12), 2).unwrap();
        let mut game = m2_game(10);
        game.initialize(&env).unwrap();
        let eps = game.config.eps_gap;
        let expect = game.total_arms() as f64 * (16.0 / 3.0) / eps;
        let h = game.complexity_estimate();
        assert!(
            (h - expect).abs() / expect < 1e-3,
            "H = {h}, expected about {expect}"
        );
    }

    #[test]
    fn b_index_monotonicity() {
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.4, 0.6], 150.0), 3).unwrap();
        let mut game = m2_game(40);
        game.initialize(&env).unwrap();
        let a = 1.7;
        let base = game.b_index(0, 0, a);
        // more pulls, everything else fixed -> smaller index
        let mut more_pulled = game.clone();
        let s = &mut more_pulled.bandits[0].arms[0].stats;
        let mean = s.mean();
        s.update(mean, false);
        s.update(mean, false);
        assert!(more_pulled.b_index(0, 0, a) < base);
        // larger variance, same pulls -> larger index
        let mut noisier = game.clone();
        let s = &mut noisier.bandits[0].arms[0].stats;
        let (lo, hi) = (s.mean() - 0.2, s.mean() + 0.2);
        s.update(lo, false);
        s.update(hi, false);
        let mut calmer = game.clone();
        let s = &mut calmer.bandits[0].arms[0].stats;
        let mu = s.mean();
        s.update(mu, false);
        s.update(mu, false);
        assert!(noisier.b_index(0, 0, a) > calmer.b_index(0, 0, a));
    }

    #[test]
    fn selection_matches_direct_index_evaluation() {
        // three bandits with hand-set statistics; the chosen arm must be
        // the argmax of the index formula evaluated independently
        let sets = [
            set(&[0], 3),
            set(&[0, 1], 3),
            set(&[0, 2], 3),
            set(&[1], 3),
            set(&[1, 2], 3),
            set(&[2], 3),
        ];
        let mut game = MultiBandit::new(
            &specs(&sets),
            3,
            None,
            100,
            MetricKind::Aupr,
            AgapeConfig::default(),
            false,
        )
        .unwrap();
        // deterministic sample loads: (samples pushed, spread)
        let mut fill = |b: usize, a: usize, center: f64, spread: f64, n: usize| {
            for i in 0..n {
                let x = center + if i % 2 == 0 { spread } else { -spread };
                game.bandits[b].arms[a].stats.update(x, i == 0);
            }
        };
        fill(0, 0, 0.52, 0.03, 4);
        fill(0, 1, 0.61, 0.01, 8);
        fill(0, 2, 0.58, 0.05, 2);
        fill(1, 0, 0.61, 0.01, 8); // shares {0,1} stats shape with (0,1)
        fill(1, 1, 0.44, 0.02, 6);
        fill(1, 2, 0.47, 0.04, 2);
        fill(2, 0, 0.58, 0.05, 2);
        fill(2, 1, 0.47, 0.04, 2);
        fill(2, 2, 0.66, 0.02, 10);
        game.t = game.init_rounds();

        let (chosen, chosen_b) = game.select_pull().unwrap();
        // independent evaluation of the formula
        let a = game.config.c * game.budget as f64 / game.complexity_estimate();
        let mut best_val = f64::NEG_INFINITY;
        let mut best_arm = (0, 0);
        for b in 0..3 {
            let means: Vec<f64> = (0..3).map(|k| game.arm_stats(b, k).mean()).collect();
            for k in 0..3 {
                let others = means
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, &v)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let gap = (others - means[k]).abs();
                let stats = game.arm_stats(b, k);
                let t = stats.pulls() as f64;
                let val =
                    -gap + (2.0 * a * stats.variance() / t).sqrt() + 7.0 * a / (3.0 * t);
                if val > best_val {
                    best_val = val;
                    best_arm = (b, k);
                }
            }
        }
        assert_eq!(
            (chosen.bandit.index(), chosen.arm_index),
            (game.bandits[best_arm.0].task.index(), best_arm.1)
        );
        assert!((chosen_b - best_val).abs() < 1e-12);
    }

    #[test]
    fn complexity_term_shrinks_with_gap() {
        // zero variance: doubling the gap halves each term exactly;
        // positive variance: the division factor exceeds two
        let lo = plug_in_complexity(&[vec![(0.5, 0.0), (0.55, 0.0)]], 1e-9, 1.0);
        let hi = plug_in_complexity(&[vec![(0.5, 0.0), (0.60, 0.0)]], 1e-9, 1.0);
        assert!((lo / hi - 2.0).abs() < 1e-9);
        let lo_v = plug_in_complexity(&[vec![(0.5, 0.01), (0.55, 0.01)]], 1e-9, 1.0);
        let hi_v = plug_in_complexity(&[vec![(0.5, 0.01), (0.60, 0.01)]], 1e-9, 1.0);
        assert!(lo_v / hi_v > 2.0);
    }

    #[test]
    fn less_pulled_arm_wins_ties() {
        let sets = [set(&[0], 2), set(&[1], 2), set(&[0, 1], 2)];
        let mut game = MultiBandit::new(
            &specs(&sets),
            2,
            Some(&[TaskId(0)]),
            20,
            MetricKind::Aupr,
            AgapeConfig::default(),
            false,
        )
        .unwrap();
        // equal means and variances, unequal pulls
        for _ in 0..2 {
            game.bandits[0].arms[0].stats.update(0.5, true);
            game.bandits[0].arms[1].stats.update(0.5, true);
        }
        game.bandits[0].arms[0].stats.update(0.5, true);
        game.t = game.init_rounds();
        let (arm, _) = game.select_pull().unwrap();
        assert_eq!(arm.arm_index, 1);
    }

    #[test]
    fn fanout_updates_every_holder_once() {
        let env = SyntheticEnv::new(
            SyntheticModel::flat(vec![0.4, 0.5, 0.6, 0.7], 150.0),
            5,
        )
        .unwrap();
        let sets = [
            set(&[0], 4),
            set(&[1], 4),
            set(&[2], 4),
            set(&[0, 2, 3], 4),
            set(&[3], 4),
            set(&[0, 1], 4),
            set(&[1, 2], 4),
        ];
        let mut game = MultiBandit::new(
            &specs(&sets),
            4,
            None,
            40,
            MetricKind::Aupr,
            AgapeConfig::default(),
            true,
        )
        .unwrap();
        game.initialize(&env).unwrap();
        let target_set = set(&[0, 2, 3], 4);
        let before: Vec<u64> = (0..4)
            .map(|b| {
                (0..game.arm_count(b))
                    .map(|a| game.arm_stats(b, a).pulls())
                    .sum::<u64>()
            })
            .collect();
        let holders = game.fanout[&target_set].clone();
        let (b0, a0) = holders[1]; // initiate from bandit 2's copy
        let arm = game.arm_ref(b0, a0);
        let record = game.apply_pull(arm, &env, None).unwrap();
        assert_eq!(record.fanout.len(), 3);
        let after: Vec<u64> = (0..4)
            .map(|b| {
                (0..game.arm_count(b))
                    .map(|a| game.arm_stats(b, a).pulls())
                    .sum::<u64>()
            })
            .collect();
        assert_eq!(after[0], before[0] + 1);
        assert_eq!(after[1], before[1]);
        assert_eq!(after[2], before[2] + 1);
        assert_eq!(after[3], before[3] + 1);
        // own pull only on the initiator
        let own: u64 = record
            .fanout
            .iter()
            .map(|f| (f.bandit == record.bandit && f.arm == record.arm) as u64)
            .sum();
        assert_eq!(own, 1);
        assert_eq!(game.violations(), 0);
    }

    #[test]
    fn singleton_pull_updates_exactly_one_bandit() {
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.4, 0.6], 150.0), 6).unwrap();
        let mut game = m2_game(40);
        game.initialize(&env).unwrap();
        let arm = game.arm_ref(0, 0); // the {0} singleton
        let record = game.apply_pull(arm, &env, None).unwrap();
        assert_eq!(record.fanout.len(), 1);
        assert_eq!(game.arm_stats(0, 0).induced_pulls(), 0);
    }

    #[test]
    fn shared_sets_keep_equal_pull_counts() {
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.4, 0.6], 150.0), 7).unwrap();
        let mut game = m2_game(60);
        game.run_to_budget(&env, Policy::AdaptiveGapE).unwrap();
        assert_eq!(game.violations(), 0);
        assert_eq!(
            game.arm_stats(0, 1).pulls(),
            game.arm_stats(1, 0).pulls(),
            "semi-overlapping arms diverged"
        );
    }

    #[test]
    fn conservation_of_rounds_and_samples() {
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.4, 0.6], 150.0), 8).unwrap();
        let mut game = m2_game(50);
        game.run_to_budget(&env, Policy::AdaptiveGapE).unwrap();
        let own: u64 = (0..2)
            .flat_map(|b| (0..game.arm_count(b)).map(move |a| (b, a)))
            .map(|(b, a)| game.arm_stats(b, a).own_pulls())
            .sum();
        let total: u64 = (0..2)
            .flat_map(|b| (0..game.arm_count(b)).map(move |a| (b, a)))
            .map(|(b, a)| game.arm_stats(b, a).pulls())
            .sum();
        assert_eq!(own, 50);
        assert_eq!(total, game.total_delivered());
        assert!(game.total_delivered() >= 50);
    }

    #[test]
    fn recommend_needs_finished_game() {
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.4, 0.6], 150.0), 9).unwrap();
        let mut game = m2_game(20);
        game.initialize(&env).unwrap();
        assert!(matches!(
            game.recommend(),
            Err(BanditError::NotFinished { .. })
        ));
        game.run_to_budget(&env, Policy::AdaptiveGapE).unwrap();
        let rec = game.recommend().unwrap();
        assert_eq!(rec.len(), 2);
    }

    #[test]
    fn dominant_arm_gets_recommended() {
        let mut model = SyntheticModel::flat(vec![0.4, 0.5], 150.0);
        model.transfer[1][0] = 0.3; // {0,1} clearly beats {0} for task 0
        let env = SyntheticEnv::new(model, 10).unwrap();
        let mut game = m2_game(200);
        game.run_to_budget(&env, Policy::AdaptiveGapE).unwrap();
        let rec = game.recommend().unwrap();
        assert_eq!(rec[&TaskId(0)], set(&[0, 1], 2));
    }

    #[test]
    fn recommendation_invariant_under_constant_shift() {
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.45, 0.6], 100.0), 12).unwrap();
        let mut game = m2_game(80);
        game.run_to_budget(&env, Policy::AdaptiveGapE).unwrap();
        let before = game.best_arm_index(0);
        // shift every sample of bandit 0's arms by a constant
        let mut shifted = game.clone();
        for arm in &mut shifted.bandits[0].arms {
            let stats = SampleStats::from_samples(
                &vec![arm.stats.mean() + 0.1; arm.stats.pulls() as usize],
            )
            .unwrap();
            // keep pulls, replace the mean by the shifted value
            let own = arm.stats.own_pulls;
            let induced = arm.stats.induced_pulls;
            arm.stats = ArmStats {
                stats,
                own_pulls: own,
                induced_pulls: induced,
            };
        }
        assert_eq!(shifted.best_arm_index(0), before);
    }

    #[test]
    fn uniform_policy_cycles_all_arms() {
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.4, 0.6], 150.0), 13).unwrap();
        let mut game = m2_game(6 + 8);
        game.run_to_budget(&env, Policy::UniformArms).unwrap();
        // 8 post-init rounds over 4 arms: each arm initiated twice
        for b in 0..2 {
            for a in 0..game.arm_count(b) {
                assert_eq!(game.arm_stats(b, a).own_pulls() >= 1, true);
            }
        }
    }

    #[test]
    fn targets_restrict_bandits_and_fanout() {
        let sets = [set(&[0], 2), set(&[0, 1], 2)];
        let env = SyntheticEnv::new(SyntheticModel::flat(vec![0.4, 0.6], 150.0), 14).unwrap();
        let mut game = MultiBandit::new(
            &specs(&sets),
            2,
            Some(&[TaskId(0)]),
            10,
            MetricKind::Aupr,
            AgapeConfig::default(),
            true,
        )
        .unwrap();
        game.run_to_budget(&env, Policy::AdaptiveGapE).unwrap();
        // pulling {0,1} delivers one sample: only bandit 0 exists
        assert_eq!(game.total_delivered(), 10);
        assert_eq!(game.targets(), vec![TaskId(0)]);
    }

    #[test]
    fn ratio_formatting_matches_published_tallies() {
        assert_eq!(own_induced_ratio_percent(12630, 60273), "20.95%");
        assert_eq!(own_induced_ratio_percent(150000, 1385315), "10.83%");
        assert_eq!(own_induced_ratio_percent(5, 0), "n/a");
    }

    #[test]
    fn base_case_augmentation_merges_tags() {
        let cands = vec![Candidate {
            set: set(&[0], 3),
            provenance: vec![crate::candidates::Provenance {
                metric: MetricKind::Aupr,
                polarity: crate::transfer::Polarity::Positive,
                test: crate::transfer::GraphTest::Diff,
                search: SearchMethod::Neighbours,
                root: TaskId(0),
            }],
        }];
        let specs = augment_with_base_cases(specs_from_candidates(&cands), 3);
        // 3 singletons + 3 pairs + full (which is also nothing else) + 3 LOO==pairs at m=3
        let singleton0 = specs.iter().find(|s| s.set == set(&[0], 3)).unwrap();
        assert!(singleton0.types.contains(&TypeTag::Search(SearchMethod::Neighbours)));
        assert!(singleton0.types.contains(&TypeTag::Scenario(ScenarioKind::Stl)));
        let pair = specs.iter().find(|s| s.set == set(&[0, 1], 3)).unwrap();
        assert!(pair.types.contains(&TypeTag::Scenario(ScenarioKind::Pw)));
        assert!(pair.types.contains(&TypeTag::Scenario(ScenarioKind::Loo)));
    }
}
