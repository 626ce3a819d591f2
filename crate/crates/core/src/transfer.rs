//! Stage 1: estimate pairwise transfer effects and build transfer graphs.
//!
//! The base-case scenario families (single-task, pairwise, full multi-task,
//! leave-one-out) are evaluated over a common set of splits, and the
//! resulting per-(set, task, metric) sample lists feed three edge tests:
//! a raw mean-difference sign test, a one-sided t-test, and the Friedman +
//! Nemenyi rank procedure. Each test yields a positive and a negative
//! directed graph per metric, twelve graphs in total.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment, SplitId};
use crate::stats::{
    friedman_test, nemenyi_posthoc, t_test_one_sided, StatsError, TTestKind,
};
use crate::task::{base_case_sets, MetricKind, TaskError, TaskId, TaskSet};

#[derive(Debug, Error)]
pub enum Stage1Error {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("environment failed on set {set}: {source}")]
    Environment { set: String, source: EnvError },
    #[error("stage-1 samples incomplete: no samples for task {task} in set {set}")]
    MissingScenario { set: String, task: TaskId },
    #[error("need at least 2 splits, got {0}")]
    TooFewSplits(u64),
    #[error("expected the 12 canonical graphs, got {0}")]
    WrongGraphCount(usize),
}

/// Direction of the transfer effect a graph encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 2] = [Polarity::Positive, Polarity::Negative];
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Positive => f.write_str("positive"),
            Polarity::Negative => f.write_str("negative"),
        }
    }
}

/// Edge-inclusion test used to build a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphTest {
    Diff,
    TTest,
    Nemenyi,
}

impl GraphTest {
    pub const ALL: [GraphTest; 3] = [GraphTest::Diff, GraphTest::TTest, GraphTest::Nemenyi];
}

impl fmt::Display for GraphTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphTest::Diff => f.write_str("diff"),
            GraphTest::TTest => f.write_str("ttest"),
            GraphTest::Nemenyi => f.write_str("nemenyi"),
        }
    }
}

/// Per-(set, task, metric) reward samples over the stage-1 splits.
///
/// Entries exist exactly for the base-case sets and their member tasks, and
/// every sample list has the same length (one sample per split, in split
/// order), so any two lists are paired by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    m: usize,
    n_splits: u64,
    sets: Vec<TaskSet>,
    data: BTreeMap<TaskSet, BTreeMap<TaskId, [Vec<f64>; 2]>>,
}

impl SampleMatrix {
    pub fn task_count(&self) -> usize {
        self.m
    }

    pub fn n_splits(&self) -> u64 {
        self.n_splits
    }

    /// The unique base-case sets, sorted.
    pub fn sets(&self) -> &[TaskSet] {
        &self.sets
    }

    pub fn samples(
        &self,
        set: TaskSet,
        task: TaskId,
        metric: MetricKind,
    ) -> Result<&[f64], Stage1Error> {
        self.data
            .get(&set)
            .and_then(|per_task| per_task.get(&task))
            .map(|pair| pair[metric.index()].as_slice())
            .ok_or(Stage1Error::MissingScenario {
                set: set.to_key(),
                task,
            })
    }

    fn mean(&self, set: TaskSet, task: TaskId, metric: MetricKind) -> Result<f64, Stage1Error> {
        let xs = self.samples(set, task, metric)?;
        Ok(xs.iter().sum::<f64>() / xs.len() as f64)
    }

    /// Standard deviation of a task's samples under one scenario; stage-1
    /// summaries report this per task for the single-task and full sets.
    pub fn std_dev(
        &self,
        set: TaskSet,
        task: TaskId,
        metric: MetricKind,
    ) -> Result<f64, Stage1Error> {
        let xs = self.samples(set, task, metric)?;
        let stats = crate::stats::SampleStats::from_samples(xs)?;
        Ok(stats.std_dev().unwrap_or(0.0))
    }

    /// All evaluations flattened back out, for writing replay-format files.
    pub fn evaluations(&self) -> impl Iterator<Item = crate::env::Evaluation> + '_ {
        self.sets.iter().flat_map(move |&set| {
            (0..self.n_splits).map(move |split| {
                let rewards = set
                    .iter()
                    .map(|task| {
                        let pair = &self.data[&set][&task];
                        (
                            task,
                            [pair[0][split as usize], pair[1][split as usize]],
                        )
                    })
                    .collect();
                crate::env::Evaluation::new(set, SplitId(split), rewards)
                    .expect("stored samples were validated on entry")
            })
        })
    }
}

/// Evaluates every base-case set on splits `0..n_splits`.
///
/// Evaluations run in parallel across sets on the current rayon pool; the
/// result is independent of the worker count.
pub fn run_stage1(
    env: &dyn Environment,
    m: usize,
    n_splits: u64,
) -> Result<SampleMatrix, Stage1Error> {
    if n_splits < 2 {
        return Err(Stage1Error::TooFewSplits(n_splits));
    }
    let sets = base_case_sets(m)?;

    let per_set: Vec<Result<(TaskSet, BTreeMap<TaskId, [Vec<f64>; 2]>), Stage1Error>> = sets
        .par_iter()
        .map(|&set| {
            let mut per_task: BTreeMap<TaskId, [Vec<f64>; 2]> = set
                .iter()
                .map(|t| {
                    (
                        t,
                        [
                            Vec::with_capacity(n_splits as usize),
                            Vec::with_capacity(n_splits as usize),
                        ],
                    )
                })
                .collect();
            for split in 0..n_splits {
                let ev = env
                    .evaluate(set, SplitId(split))
                    .map_err(|source| Stage1Error::Environment {
                        set: set.to_key(),
                        source,
                    })?;
                for (task, pair) in &ev.rewards {
                    let slot = per_task.get_mut(task).expect("member task");
                    slot[0].push(pair[0]);
                    slot[1].push(pair[1]);
                }
            }
            Ok((set, per_task))
        })
        .collect();

    let mut data = BTreeMap::new();
    for item in per_set {
        let (set, per_task) = item?;
        data.insert(set, per_task);
    }
    Ok(SampleMatrix {
        m,
        n_splits,
        sets,
        data,
    })
}

/// Directed transfer graph over tasks: edge `(p, q)` asserts task p
/// transfers onto target q. Weights carry the mean paired difference used
/// by the edge test whether or not the edge is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferGraph {
    pub metric: MetricKind,
    pub polarity: Polarity,
    pub test: GraphTest,
    pub m: usize,
    adjacency: Vec<Vec<bool>>,
    weights: Vec<Vec<f64>>,
}

impl TransferGraph {
    pub fn new(metric: MetricKind, polarity: Polarity, test: GraphTest, m: usize) -> TransferGraph {
        TransferGraph {
            metric,
            polarity,
            test,
            m,
            adjacency: vec![vec![false; m]; m],
            weights: vec![vec![0.0; m]; m],
        }
    }

    pub fn edge(&self, p: TaskId, q: TaskId) -> bool {
        self.adjacency[p.index()][q.index()]
    }

    pub fn weight(&self, p: TaskId, q: TaskId) -> f64 {
        self.weights[p.index()][q.index()]
    }

    pub fn set_edge(&mut self, p: TaskId, q: TaskId, present: bool, weight: f64) {
        assert_ne!(p, q, "self-loops are not representable");
        self.adjacency[p.index()][q.index()] = present;
        self.weights[p.index()][q.index()] = weight;
    }

    pub fn edges(&self) -> impl Iterator<Item = (TaskId, TaskId)> + '_ {
        (0..self.m).flat_map(move |p| {
            (0..self.m).filter_map(move |q| {
                if self.adjacency[p][q] {
                    Some((TaskId(p), TaskId(q)))
                } else {
                    None
                }
            })
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Tag triple used in file names and provenance, e.g. `aupr_positive_diff`.
    pub fn tag(&self) -> String {
        format!("{}_{}_{}", self.metric, self.polarity, self.test)
    }

    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph \"{}\" {{\n", self.tag());
        for p in 0..self.m {
            out.push_str(&format!("  {p};\n"));
        }
        for (p, q) in self.edges() {
            out.push_str(&format!(
                "  {} -> {} [label=\"{:.4}\"];\n",
                p.index(),
                q.index(),
                self.weight(p, q)
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// The two scenario sets a transfer test compares for a candidate edge
/// `(p, q)`: pair-vs-single for positive transfer, leave-`p`-out vs full
/// multi-task for negative transfer.
fn comparison_sets(polarity: Polarity, p: TaskId, q: TaskId, m: usize) -> (TaskSet, TaskSet) {
    match polarity {
        Polarity::Positive => (
            TaskSet::singleton(p).with(q),
            TaskSet::singleton(q),
        ),
        Polarity::Negative => {
            let full = TaskSet::full(m);
            (full.without(p), full)
        }
    }
}

/// Mean-difference graph: edge iff the scenario mean strictly exceeds the
/// baseline mean; ties produce no edge.
pub fn build_graph_diff(
    samples: &SampleMatrix,
    metric: MetricKind,
    polarity: Polarity,
) -> Result<TransferGraph, Stage1Error> {
    let m = samples.task_count();
    let mut graph = TransferGraph::new(metric, polarity, GraphTest::Diff, m);
    for p in 0..m {
        for q in 0..m {
            if p == q {
                continue;
            }
            let (p, q) = (TaskId(p), TaskId(q));
            let (scenario, baseline) = comparison_sets(polarity, p, q, m);
            let w = samples.mean(scenario, q, metric)? - samples.mean(baseline, q, metric)?;
            graph.set_edge(p, q, w > 0.0, w);
        }
    }
    Ok(graph)
}

/// t-test graph: edge iff the one-sided test rejects "no improvement".
pub fn build_graph_ttest(
    samples: &SampleMatrix,
    metric: MetricKind,
    polarity: Polarity,
    alpha: f64,
    kind: TTestKind,
) -> Result<TransferGraph, Stage1Error> {
    let m = samples.task_count();
    let mut graph = TransferGraph::new(metric, polarity, GraphTest::TTest, m);
    for p in 0..m {
        for q in 0..m {
            if p == q {
                continue;
            }
            let (p, q) = (TaskId(p), TaskId(q));
            let (scenario, baseline) = comparison_sets(polarity, p, q, m);
            let a = samples.samples(scenario, q, metric)?;
            let b = samples.samples(baseline, q, metric)?;
            let result = t_test_one_sided(a, b, alpha, kind)?;
            let w = samples.mean(scenario, q, metric)? - samples.mean(baseline, q, metric)?;
            graph.set_edge(p, q, result.significant, w);
        }
    }
    Ok(graph)
}

/// Column layout of the per-target Nemenyi block matrix: the target's
/// single-task scenario, its pair scenarios, the full set, and the
/// leave-one-out scenarios that still contain the target (2M columns).
struct NemenyiColumns {
    sets: Vec<TaskSet>,
    pair_col: BTreeMap<TaskId, usize>,
    loo_col: BTreeMap<TaskId, usize>,
    stl_col: usize,
    full_col: usize,
}

fn nemenyi_columns(q: TaskId, m: usize) -> NemenyiColumns {
    let full = TaskSet::full(m);
    let mut sets = vec![TaskSet::singleton(q)];
    let mut pair_col = BTreeMap::new();
    for p in 0..m {
        if p != q.index() {
            pair_col.insert(TaskId(p), sets.len());
            sets.push(TaskSet::singleton(TaskId(p)).with(q));
        }
    }
    let full_col = sets.len();
    sets.push(full);
    let mut loo_col = BTreeMap::new();
    for p in 0..m {
        if p != q.index() {
            loo_col.insert(TaskId(p), sets.len());
            sets.push(full.without(TaskId(p)));
        }
    }
    NemenyiColumns {
        sets,
        pair_col,
        loo_col,
        stl_col: 0,
        full_col,
    }
}

/// Friedman-gated Nemenyi graph: a target receives edges only when the
/// Friedman test over its 2M scenario columns is significant, and an edge
/// requires the scenario column to outrank its baseline by more than the
/// critical difference.
pub fn build_graph_nemenyi(
    samples: &SampleMatrix,
    metric: MetricKind,
    polarity: Polarity,
    alpha: f64,
    tie_correction: bool,
) -> Result<TransferGraph, Stage1Error> {
    let m = samples.task_count();
    let n_splits = samples.n_splits() as usize;
    let mut graph = TransferGraph::new(metric, polarity, GraphTest::Nemenyi, m);
    for q in (0..m).map(TaskId) {
        let cols = nemenyi_columns(q, m);
        let col_samples: Vec<&[f64]> = cols
            .sets
            .iter()
            .map(|&set| samples.samples(set, q, metric))
            .collect::<Result<_, _>>()?;
        let blocks: Vec<Vec<f64>> = (0..n_splits)
            .map(|s| col_samples.iter().map(|col| col[s]).collect())
            .collect();
        let gate = friedman_test(&blocks, alpha, tie_correction)?;
        let posthoc = if gate.significant {
            Some(nemenyi_posthoc(&blocks, alpha)?)
        } else {
            None
        };

        for p in (0..m).map(TaskId) {
            if p == q {
                continue;
            }
            let (scenario_col, baseline_col) = match polarity {
                Polarity::Positive => (cols.pair_col[&p], cols.stl_col),
                Polarity::Negative => (cols.loo_col[&p], cols.full_col),
            };
            let w = samples.mean(cols.sets[scenario_col], q, metric)?
                - samples.mean(cols.sets[baseline_col], q, metric)?;
            let present = posthoc.as_ref().is_some_and(|ph| {
                ph.significant[scenario_col][baseline_col]
                    && ph.avg_ranks[scenario_col] > ph.avg_ranks[baseline_col]
            });
            graph.set_edge(p, q, present, w);
        }
    }
    Ok(graph)
}

/// Flags shared by the stage-1 graph builders.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GraphBuildConfig {
    pub alpha: f64,
    pub t_test_kind: TTestKind,
    pub tie_correction: bool,
    /// Bonferroni-correct the per-edge alpha of p-value based tests by the
    /// number of directed pairs. The Nemenyi table alphas are fixed, so the
    /// correction applies to the t-test and the Friedman gate only.
    pub bonferroni: bool,
}

impl Default for GraphBuildConfig {
    fn default() -> Self {
        GraphBuildConfig {
            alpha: 0.05,
            t_test_kind: TTestKind::Pooled,
            tie_correction: false,
            bonferroni: false,
        }
    }
}

/// Builds the twelve graphs in canonical order:
/// metric (aupr, auroc) x polarity (positive, negative) x test (diff,
/// ttest, nemenyi).
pub fn build_all_graphs(
    samples: &SampleMatrix,
    config: &GraphBuildConfig,
) -> Result<Vec<TransferGraph>, Stage1Error> {
    let m = samples.task_count();
    let edge_tests = (m * (m - 1)) as f64;
    let p_alpha = if config.bonferroni {
        config.alpha / edge_tests
    } else {
        config.alpha
    };
    let mut graphs = Vec::with_capacity(12);
    for metric in MetricKind::ALL {
        for polarity in Polarity::ALL {
            for test in GraphTest::ALL {
                let graph = match test {
                    GraphTest::Diff => build_graph_diff(samples, metric, polarity)?,
                    GraphTest::TTest => build_graph_ttest(
                        samples,
                        metric,
                        polarity,
                        p_alpha,
                        config.t_test_kind,
                    )?,
                    GraphTest::Nemenyi => build_graph_nemenyi(
                        samples,
                        metric,
                        polarity,
                        config.alpha,
                        config.tie_correction,
                    )?,
                };
                graphs.push(graph);
            }
        }
    }
    Ok(graphs)
}
