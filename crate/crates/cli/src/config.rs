//! Run configuration: a single JSON document drives every stage.
//!
//! Unknown keys are rejected so a config file cannot silently misspell an
//! option. Relative paths inside the config resolve against the config
//! file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use auxsel_core::bandit::{AgapeConfig, Policy};
use auxsel_core::env::replay::ReplayEnv;
use auxsel_core::env::synthetic::{SyntheticEnv, SyntheticModel};
use auxsel_core::env::table::TableEnv;
use auxsel_core::env::{Environment, GroundTruth};
use auxsel_core::stats::TTestKind;
use auxsel_core::task::MetricKind;
use auxsel_core::transfer::GraphBuildConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "lowercase")]
pub enum EnvironmentSpec {
    /// Synthetic generator; `path` points at a model JSON document.
    Synthetic { path: PathBuf },
    /// Recorded results in the replay CSV format.
    Replay { path: PathBuf },
    /// Mean table CSV plus Beta noise at the given concentration.
    Table {
        path: PathBuf,
        noise_concentration: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlagSet {
    /// Use Welch's unequal-variance t-test instead of the pooled test.
    pub welch: bool,
    /// Use the paired t-test on per-split differences.
    pub paired_t: bool,
    /// Apply the tie-correction divisor to the Friedman statistic.
    pub tie_correction: bool,
    /// Offer the base-case scenario sets as additional arms in stage 3.
    pub include_base_case_arms: bool,
    /// Bonferroni-correct the per-edge alpha of p-value based tests.
    pub bonferroni: bool,
}

impl Default for FlagSet {
    fn default() -> Self {
        FlagSet {
            welch: false,
            paired_t: false,
            tie_correction: false,
            include_base_case_arms: false,
            bonferroni: false,
        }
    }
}

fn default_n_splits() -> u64 {
    500
}

fn default_alpha() -> f64 {
    0.05
}

fn default_metric() -> MetricKind {
    MetricKind::Aupr
}

fn default_policy() -> Policy {
    Policy::AdaptiveGapE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Number of tasks in the instance.
    pub m: usize,
    pub environment: EnvironmentSpec,
    /// Base seed for every deterministic stream.
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo splits per base-case scenario in stage 1.
    #[serde(default = "default_n_splits")]
    pub n_splits: u64,
    /// Total stage-3 rounds, initialization included.
    pub budget: u64,
    /// Reward channel driving stage 3.
    #[serde(default = "default_metric")]
    pub reward_metric: MetricKind,
    /// Significance level for the stage-1 edge tests.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub agape: AgapeConfig,
    #[serde(default)]
    pub flags: FlagSet,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    /// Target tasks owning bandits; all tasks when omitted.
    #[serde(default)]
    pub targets: Option<Vec<usize>>,
    /// Metrics snapshot period in rounds; `max(1, budget/1000)` when
    /// omitted, 0 means final snapshot only.
    #[serde(default)]
    pub metrics_cadence: Option<u64>,
    /// Stage-1 evaluation worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    /// Verify same-set pull-count equality after every round.
    #[serde(default)]
    pub check_invariants: bool,
    /// Output directory (overridable with --out).
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(RunConfig, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((config, base_dir))
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=auxsel_core::task::MAX_TASKS).contains(&self.m) {
            bail!("m = {} outside 2..={}", self.m, auxsel_core::task::MAX_TASKS);
        }
        if self.n_splits < 2 {
            bail!("n_splits must be at least 2");
        }
        if !(0.0..1.0).contains(&self.alpha) || self.alpha <= 0.0 {
            bail!("alpha must lie in (0, 1)");
        }
        if self.flags.welch && self.flags.paired_t {
            bail!("flags welch and paired_t are mutually exclusive");
        }
        if !(self.agape.c > 0.0) || !(self.agape.eps_gap > 0.0) || !(self.agape.b > 0.0) {
            bail!("agape constants c, eps_gap, b must be positive");
        }
        if let Some(targets) = &self.targets {
            if targets.iter().any(|&t| t >= self.m) {
                bail!("targets contain a task id outside 0..{}", self.m);
            }
        }
        Ok(())
    }

    pub fn t_test_kind(&self) -> TTestKind {
        if self.flags.paired_t {
            TTestKind::Paired
        } else if self.flags.welch {
            TTestKind::Welch
        } else {
            TTestKind::Pooled
        }
    }

    pub fn graph_build_config(&self) -> GraphBuildConfig {
        GraphBuildConfig {
            alpha: self.alpha,
            t_test_kind: self.t_test_kind(),
            tie_correction: self.flags.tie_correction,
            bonferroni: self.flags.bonferroni,
        }
    }

    pub fn cadence(&self) -> u64 {
        self.metrics_cadence
            .unwrap_or_else(|| (self.budget / 1000).max(1))
    }

    pub fn target_ids(&self) -> Option<Vec<auxsel_core::TaskId>> {
        self.targets
            .as_ref()
            .map(|ts| ts.iter().map(|&t| auxsel_core::TaskId(t)).collect())
    }
}

/// A constructed environment, keeping the concrete type around so ground
/// truth is available where the mode supports it.
pub enum BuiltEnv {
    Synthetic(SyntheticEnv),
    Replay(ReplayEnv),
    Table(TableEnv),
}

impl BuiltEnv {
    pub fn as_env(&self) -> &dyn Environment {
        match self {
            BuiltEnv::Synthetic(e) => e,
            BuiltEnv::Replay(e) => e,
            BuiltEnv::Table(e) => e,
        }
    }

    pub fn ground_truth(&self) -> Option<&dyn GroundTruth> {
        match self {
            BuiltEnv::Synthetic(e) => Some(e),
            BuiltEnv::Table(e) => Some(e),
            BuiltEnv::Replay(_) => None,
        }
    }

    pub fn replay(&self) -> Option<&ReplayEnv> {
        match self {
            BuiltEnv::Replay(e) => Some(e),
            _ => None,
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            BuiltEnv::Synthetic(_) => "synthetic",
            BuiltEnv::Replay(_) => "replay",
            BuiltEnv::Table(_) => "table",
        }
    }
}

/// Builds the configured environment, resolving relative paths against the
/// config file's directory.
pub fn build_environment(config: &RunConfig, base_dir: &Path) -> Result<BuiltEnv> {
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    };
    match &config.environment {
        EnvironmentSpec::Synthetic { path } => {
            let path = resolve(path);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading synthetic model {}", path.display()))?;
            let model: SyntheticModel = serde_json::from_str(&text)
                .with_context(|| format!("parsing synthetic model {}", path.display()))?;
            if model.task_count() != config.m {
                bail!(
                    "synthetic model has {} tasks but config says m = {}",
                    model.task_count(),
                    config.m
                );
            }
            Ok(BuiltEnv::Synthetic(SyntheticEnv::new(model, config.seed)?))
        }
        EnvironmentSpec::Replay { path } => {
            let path = resolve(path);
            Ok(BuiltEnv::Replay(ReplayEnv::load(&path, config.m).with_context(
                || format!("loading replay file {}", path.display()),
            )?))
        }
        EnvironmentSpec::Table {
            path,
            noise_concentration,
        } => {
            let path = resolve(path);
            Ok(BuiltEnv::Table(
                TableEnv::load(&path, config.m, config.seed, *noise_concentration)
                    .with_context(|| format!("loading mean table {}", path.display()))?,
            ))
        }
    }
}
