//! Stage orchestration: wiring configs, environments, core operations, and
//! artifact files together.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use auxsel_core::bandit::{
    augment_with_base_cases, specs_from_candidates, ArmSpec, MultiBandit, Policy, TypeTag,
};
use auxsel_core::candidates::{generate_arms, GenerateOutcome};
use auxsel_core::env::SplitId;
use auxsel_core::oracle::{exact_best_arms, true_simple_regret, OracleReport, POWER_SET_TASK_LIMIT};
use auxsel_core::task::{base_case_sets, ScenarioKind, TaskId, TaskSet};
use auxsel_core::transfer::{build_all_graphs, run_stage1, SampleMatrix, TransferGraph};

use crate::config::{build_environment, BuiltEnv, RunConfig};
use crate::report;

pub struct Pipeline {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
struct Stage3Summary {
    budget: u64,
    init_rounds: u64,
    unique_sets: usize,
    total_arms: usize,
    targets: Vec<usize>,
    total_delivered: u64,
    own_total: u64,
    induced_total: u64,
    violations: Option<u64>,
    augmented_tasks: Vec<usize>,
    include_base_case_arms: bool,
    policy: Policy,
    reward_metric: auxsel_core::task::MetricKind,
    oracle_attached: bool,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    m: usize,
    seed: u64,
    environment: &'static str,
    stages: Vec<&'static str>,
}

impl Pipeline {
    pub fn new(config: RunConfig, base_dir: PathBuf) -> Result<Pipeline> {
        let out_dir = config.out_dir.clone();
        std::fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Pipeline {
            config,
            base_dir,
            out_dir,
        })
    }

    pub fn build_env(&self) -> Result<BuiltEnv> {
        build_environment(&self.config, &self.base_dir)
    }

    fn with_worker_pool<T>(&self, f: impl FnOnce() -> T + Send) -> Result<T>
    where
        T: Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .context("building worker pool")?;
        Ok(pool.install(f))
    }

    /// Stage 1: evaluate base cases, build the twelve graphs, write
    /// samples, graphs, and the summary.
    pub fn stage1(&self, env: &BuiltEnv) -> Result<(SampleMatrix, Vec<TransferGraph>)> {
        let m = self.config.m;
        let n_splits = self.config.n_splits;

        if let Some(replay) = env.replay() {
            let sets = base_case_sets(m)?;
            let wanted = sets
                .iter()
                .flat_map(|&s| (0..n_splits).map(move |i| (s, SplitId(i))));
            let missing = replay.missing(wanted);
            if !missing.is_empty() {
                let shown: Vec<String> = missing
                    .iter()
                    .take(20)
                    .map(|(s, i)| format!("({}, {})", s.to_key(), i))
                    .collect();
                bail!(
                    "replay lacks {} (set, split) pairs needed by stage 1: {}{}",
                    missing.len(),
                    shown.join(", "),
                    if missing.len() > 20 { ", ..." } else { "" }
                );
            }
        }

        let samples = self
            .with_worker_pool(|| run_stage1(env.as_env(), m, n_splits))?
            .context("stage 1 evaluation")?;
        let graphs = build_all_graphs(&samples, &self.config.graph_build_config())?;

        report::write_samples(&self.out_dir, &samples)?;
        report::write_graphs(&self.out_dir, &graphs)?;
        report::write_json(
            &self.out_dir.join(report::STAGE1_SUMMARY_FILE),
            &report::stage1_summary(&samples, &graphs)?,
        )?;
        Ok((samples, graphs))
    }

    /// Stage 2: run the searches over the twelve graphs and write the
    /// deduplicated candidates plus the size histogram and per-target views.
    pub fn stage2(&self, graphs: &[TransferGraph]) -> Result<GenerateOutcome> {
        let outcome = generate_arms(graphs, self.config.m)?;
        report::write_json(&self.out_dir.join(report::CANDIDATES_FILE), &outcome)?;
        report::write_candidate_sizes(&self.out_dir, &outcome)?;
        report::write_candidate_views(&self.out_dir, &outcome, self.config.m)?;
        Ok(outcome)
    }

    pub fn load_graphs(&self) -> Result<Vec<TransferGraph>> {
        report::load_graphs(&self.out_dir)
    }

    pub fn load_candidates(&self) -> Result<GenerateOutcome> {
        report::read_json(&self.out_dir.join(report::CANDIDATES_FILE))
    }

    /// Arm specs for stage 3: stage-2 candidates, optional base-case arms,
    /// and singleton/full-set augmentation for under-covered targets.
    fn arm_specs(
        &self,
        outcome: &GenerateOutcome,
        targets: &[TaskId],
    ) -> (Vec<ArmSpec>, Vec<usize>) {
        let m = self.config.m;
        let mut specs = specs_from_candidates(&outcome.candidates);
        if self.config.flags.include_base_case_arms {
            specs = augment_with_base_cases(specs, m);
        }
        let mut augmented = Vec::new();
        for &target in targets {
            let covering = specs.iter().filter(|s| s.set.contains(target)).count();
            if covering < 2 {
                augmented.push(target.index());
                let mut add = |set: TaskSet, tag: TypeTag| {
                    match specs.iter_mut().find(|s| s.set == set) {
                        Some(existing) => {
                            if !existing.types.contains(&tag) {
                                existing.types.push(tag);
                                existing.types.sort();
                            }
                        }
                        None => specs.push(ArmSpec {
                            set,
                            types: vec![tag],
                        }),
                    }
                };
                add(
                    TaskSet::singleton(target),
                    TypeTag::Scenario(ScenarioKind::Stl),
                );
                add(TaskSet::full(m), TypeTag::Scenario(ScenarioKind::Fmtl));
            }
        }
        specs.sort_by_key(|s| s.set);
        (specs, augmented)
    }

    /// Stage 3: play the multi-bandit to the budget, logging rounds and
    /// periodic metric snapshots, and write the recommendation artifacts.
    pub fn stage3(&self, env: &BuiltEnv, outcome: &GenerateOutcome) -> Result<()> {
        let config = &self.config;
        let targets: Vec<TaskId> = config
            .target_ids()
            .unwrap_or_else(|| (0..config.m).map(TaskId).collect());
        let (specs, augmented) = self.arm_specs(outcome, &targets);
        if !augmented.is_empty() {
            eprintln!(
                "stage3: augmented under-covered targets {:?} with their singleton and the full set",
                augmented
            );
        }

        let mut game = MultiBandit::new(
            &specs,
            config.m,
            Some(&targets),
            config.budget,
            config.reward_metric,
            config.agape,
            config.check_invariants,
        )?;

        let oracle = match env.ground_truth() {
            Some(truth) => {
                let sets: Vec<TaskSet> = specs.iter().map(|s| s.set).collect();
                Some(exact_best_arms(
                    truth,
                    config.m,
                    Some(&targets),
                    &sets,
                    config.reward_metric,
                    config.agape.eps_gap,
                    false,
                )?)
            }
            None => None,
        };

        let mut rounds = report::RoundLog::create(&self.out_dir)?;
        let mut metrics = report::MetricsLog::create(&self.out_dir)?;
        let cadence = config.cadence();

        for record in game.initialize(env.as_env())? {
            rounds.push(&record)?;
        }
        if cadence > 0 {
            metrics.push(&game.metrics_snapshot(oracle.as_ref()))?;
        }

        while game.round() < game.budget() {
            let (arm, b_index) = match config.policy {
                Policy::AdaptiveGapE => {
                    let (arm, b) = game.select_pull()?;
                    (arm, Some(b))
                }
                Policy::UniformArms => (game.select_uniform()?, None),
            };
            let record = game.apply_pull(arm, env.as_env(), b_index)?;
            rounds.push(&record)?;
            if cadence > 0 && game.round() % cadence == 0 && game.round() < game.budget() {
                metrics.push(&game.metrics_snapshot(oracle.as_ref()))?;
            }
        }
        metrics.push(&game.metrics_snapshot(oracle.as_ref()))?;
        rounds.finish()?;
        metrics.finish()?;

        let recommendations = game.recommend()?;
        let rows: Vec<report::RecommendationRow> = recommendations
            .iter()
            .map(|(&task, &set)| {
                let b_idx = game
                    .targets()
                    .iter()
                    .position(|&t| t == task)
                    .expect("recommended task is a target");
                let arm = game
                    .arm_sets(b_idx)
                    .iter()
                    .position(|&s| s == set)
                    .expect("recommended set is an arm");
                let stats = game.arm_stats(b_idx, arm);
                report::RecommendationRow {
                    task: task.index(),
                    set,
                    set_size: set.len(),
                    mean: stats.mean(),
                    pulls: stats.pulls(),
                    own_pulls: stats.own_pulls(),
                    induced_pulls: stats.induced_pulls(),
                }
            })
            .collect();
        report::write_recommendations(&self.out_dir, &rows)?;

        let final_snapshot = game.metrics_snapshot(oracle.as_ref());
        let pull_rows: Vec<(usize, u64, u64)> = final_snapshot
            .bandits
            .iter()
            .map(|b| (b.task, b.own_pulls, b.induced_pulls))
            .collect();
        report::write_pull_table(&self.out_dir, &pull_rows)?;

        let own_total: u64 = pull_rows.iter().map(|r| r.1).sum();
        let induced_total: u64 = pull_rows.iter().map(|r| r.2).sum();
        report::write_json(
            &self.out_dir.join(report::STAGE3_SUMMARY_FILE),
            &Stage3Summary {
                budget: game.budget(),
                init_rounds: game.init_rounds(),
                unique_sets: game.unique_sets().len(),
                total_arms: game.total_arms(),
                targets: targets.iter().map(|t| t.index()).collect(),
                total_delivered: game.total_delivered(),
                own_total,
                induced_total,
                violations: config.check_invariants.then(|| game.violations()),
                augmented_tasks: augmented,
                include_base_case_arms: config.flags.include_base_case_arms,
                policy: config.policy,
                reward_metric: config.reward_metric,
                oracle_attached: oracle.is_some(),
            },
        )?;
        Ok(())
    }

    /// Oracle report over the candidate list, or over the full power set
    /// when no candidates are given (small instances only).
    pub fn oracle(
        &self,
        env: &BuiltEnv,
        candidates: Option<&GenerateOutcome>,
        recommendations_path: Option<&Path>,
        include_power_set: bool,
    ) -> Result<OracleReport> {
        let truth = env.ground_truth().ok_or_else(|| {
            anyhow::anyhow!(
                "the {} environment has no ground truth; the oracle needs synthetic or table mode",
                env.mode_name()
            )
        })?;
        let m = self.config.m;
        let targets: Vec<TaskId> = self
            .config
            .target_ids()
            .unwrap_or_else(|| (0..m).map(TaskId).collect());

        let (sets, power_set) = match candidates {
            Some(outcome) => {
                let sets: Vec<TaskSet> = outcome.candidates.iter().map(|c| c.set).collect();
                (sets, include_power_set)
            }
            None => {
                if m > POWER_SET_TASK_LIMIT {
                    bail!(
                        "power-set oracle supports at most {POWER_SET_TASK_LIMIT} tasks (m = {m}); \
                         pass --candidates for candidate-list mode"
                    );
                }
                let all: Vec<TaskSet> = (1u64..(1u64 << m))
                    .map(TaskSet::from_bits)
                    .collect();
                (all, false)
            }
        };

        let report = exact_best_arms(
            truth,
            m,
            Some(&targets),
            &sets,
            self.config.reward_metric,
            self.config.agape.eps_gap,
            power_set,
        )?;
        report::write_json(&self.out_dir.join(report::ORACLE_FILE), &report)?;

        if let Some(path) = recommendations_path {
            let recommendations = report::load_recommendations(path)?;
            let known: BTreeSet<TaskId> = report.bandits.iter().map(|b| b.task).collect();
            let filtered: std::collections::BTreeMap<TaskId, TaskSet> = recommendations
                .into_iter()
                .filter(|(t, _)| known.contains(t))
                .collect();
            let rows = true_simple_regret(&report, &filtered)?;
            report::write_regret(&self.out_dir, &rows)?;
        }
        Ok(report)
    }

    /// All stages in order; the oracle runs when ground truth exists.
    pub fn run_all(&self) -> Result<()> {
        let env = self.build_env()?;
        let (_, graphs) = self.stage1(&env)?;
        let outcome = self.stage2(&graphs)?;
        self.stage3(&env, &outcome)?;
        let mut stages = vec!["stage1", "stage2", "stage3"];
        if env.ground_truth().is_some() {
            self.oracle(
                &env,
                Some(&outcome),
                Some(&self.out_dir.join(report::RECOMMENDATIONS_JSON)),
                false,
            )?;
            stages.push("oracle");
        }
        report::write_json(
            &self.out_dir.join(report::RUN_SUMMARY_FILE),
            &RunSummary {
                m: self.config.m,
                seed: self.config.seed,
                environment: env.mode_name(),
                stages,
            },
        )?;
        Ok(())
    }
}
