//! File writers and readers for every pipeline artifact.
//!
//! All CSV output is UTF-8 with LF line endings, a header row, and
//! RFC-4180 quoting (the `csv` crate's defaults). JSON is pretty-printed
//! with a trailing newline. Nothing here embeds timestamps or absolute
//! paths, so identical runs produce byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use auxsel_core::bandit::{RoundMetrics, RoundRecord};
use auxsel_core::candidates::GenerateOutcome;
use auxsel_core::env::replay::write_replay_csv;
use auxsel_core::oracle::RegretRow;
use auxsel_core::task::{MetricKind, ScenarioKind, TaskId, TaskSet};
use auxsel_core::transfer::{GraphTest, Polarity, SampleMatrix, TransferGraph};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const GRAPHS_DIR: &str = "graphs";
pub const STAGE1_SUMMARY_FILE: &str = "stage1_summary.json";
pub const CANDIDATES_FILE: &str = "candidates.json";
pub const CANDIDATE_SIZES_FILE: &str = "candidate_sizes.csv";
pub const CANDIDATE_VIEWS_FILE: &str = "candidate_views.json";
pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TYPE_PULLS_FILE: &str = "type_pulls.csv";
pub const RECOMMENDATIONS_JSON: &str = "recommendations.json";
pub const RECOMMENDATIONS_CSV: &str = "recommendations.csv";
pub const PULL_TABLE_FILE: &str = "pull_table.csv";
pub const STAGE3_SUMMARY_FILE: &str = "stage3_summary.json";
pub const ORACLE_FILE: &str = "oracle.json";
pub const ORACLE_REGRET_JSON: &str = "oracle_regret.json";
pub const ORACLE_REGRET_CSV: &str = "oracle_regret.csv";
pub const RUN_SUMMARY_FILE: &str = "run_summary.json";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

// ---------------------------------------------------------------------------
// stage 1
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct Stage1Summary {
    pub m: usize,
    pub n_splits: u64,
    pub base_case_sets: usize,
    /// Directed edge count per graph tag.
    pub edge_counts: BTreeMap<String, usize>,
    /// Per-task sample standard deviations under the single-task and full
    /// multi-task scenarios.
    pub per_task_std: Vec<TaskStdRow>,
}

#[derive(Debug, Serialize)]
pub struct TaskStdRow {
    pub task: usize,
    pub metric: MetricKind,
    pub scenario: ScenarioKind,
    pub std_dev: f64,
}

pub fn write_samples(out_dir: &Path, samples: &SampleMatrix) -> Result<()> {
    let path = out_dir.join(SAMPLES_FILE);
    let file = BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    write_replay_csv(file, samples.evaluations())?;
    Ok(())
}

pub fn write_graphs(out_dir: &Path, graphs: &[TransferGraph]) -> Result<()> {
    let dir = out_dir.join(GRAPHS_DIR);
    std::fs::create_dir_all(&dir)?;
    for graph in graphs {
        write_json(&dir.join(format!("graph_{}.json", graph.tag())), graph)?;
        std::fs::write(dir.join(format!("graph_{}.dot", graph.tag())), graph.to_dot())?;
    }
    Ok(())
}

pub fn load_graphs(out_dir: &Path) -> Result<Vec<TransferGraph>> {
    let dir = out_dir.join(GRAPHS_DIR);
    let mut graphs = Vec::with_capacity(12);
    for metric in MetricKind::ALL {
        for polarity in Polarity::ALL {
            for test in GraphTest::ALL {
                let path = dir.join(format!("graph_{metric}_{polarity}_{test}.json"));
                if !path.exists() {
                    bail!(
                        "missing graph file {} (run stage1 first)",
                        path.display()
                    );
                }
                graphs.push(read_json(&path)?);
            }
        }
    }
    Ok(graphs)
}

pub fn stage1_summary(
    samples: &SampleMatrix,
    graphs: &[TransferGraph],
) -> Result<Stage1Summary> {
    let m = samples.task_count();
    let mut per_task_std = Vec::new();
    let full = TaskSet::full(m);
    for task in (0..m).map(TaskId) {
        for metric in MetricKind::ALL {
            per_task_std.push(TaskStdRow {
                task: task.index(),
                metric,
                scenario: ScenarioKind::Stl,
                std_dev: samples.std_dev(TaskSet::singleton(task), task, metric)?,
            });
            per_task_std.push(TaskStdRow {
                task: task.index(),
                metric,
                scenario: ScenarioKind::Fmtl,
                std_dev: samples.std_dev(full, task, metric)?,
            });
        }
    }
    Ok(Stage1Summary {
        m,
        n_splits: samples.n_splits(),
        base_case_sets: samples.sets().len(),
        edge_counts: graphs
            .iter()
            .map(|g| (g.tag(), g.edge_count()))
            .collect(),
        per_task_std,
    })
}

// ---------------------------------------------------------------------------
// stage 2
// ---------------------------------------------------------------------------

pub fn write_candidate_sizes(out_dir: &Path, outcome: &GenerateOutcome) -> Result<()> {
    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    for c in &outcome.candidates {
        *histogram.entry(c.set.len()).or_insert(0) += 1;
    }
    let path = out_dir.join(CANDIDATE_SIZES_FILE);
    let mut w = csv::Writer::from_path(&path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["size", "count"])?;
    for (size, count) in histogram {
        w.write_record([size.to_string(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Default, Serialize)]
struct TrieNode {
    leaf: bool,
    children: BTreeMap<usize, TrieNode>,
}

#[derive(Debug, Serialize)]
struct TargetView {
    task: usize,
    /// Candidate sets containing the target, as sorted member lists.
    sets: Vec<TaskSet>,
    /// The same sets as a prefix trie over ascending members.
    trie: TrieNode,
}

/// Per-target candidate views: the membership matrix columns and a trie,
/// both meant for external rendering.
pub fn write_candidate_views(
    out_dir: &Path,
    outcome: &GenerateOutcome,
    m: usize,
) -> Result<()> {
    let mut views = Vec::with_capacity(m);
    for task in (0..m).map(TaskId) {
        let sets: Vec<TaskSet> = outcome
            .candidates
            .iter()
            .map(|c| c.set)
            .filter(|s| s.contains(task))
            .collect();
        let mut trie = TrieNode::default();
        for set in &sets {
            let mut node = &mut trie;
            for member in set.iter() {
                node = node.children.entry(member.index()).or_default();
            }
            node.leaf = true;
        }
        views.push(TargetView {
            task: task.index(),
            sets,
            trie,
        });
    }
    write_json(&out_dir.join(CANDIDATE_VIEWS_FILE), &views)
}

// ---------------------------------------------------------------------------
// stage 3
// ---------------------------------------------------------------------------

/// Streaming JSON-lines writer for round records.
pub struct RoundLog {
    writer: BufWriter<File>,
}

impl RoundLog {
    pub fn create(out_dir: &Path) -> Result<RoundLog> {
        let path = out_dir.join(ROUNDS_FILE);
        Ok(RoundLog {
            writer: BufWriter::new(
                File::create(&path).with_context(|| format!("creating {}", path.display()))?,
            ),
        })
    }

    pub fn push(&mut self, record: &RoundRecord) -> Result<()> {
        serde_json::to_writer(&mut self.writer, record)?;
        self.writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Streaming writer for the per-bandit metrics time series and the
/// per-type pull breakdown.
pub struct MetricsLog {
    metrics: csv::Writer<File>,
    types: csv::Writer<File>,
}

impl MetricsLog {
    pub fn create(out_dir: &Path) -> Result<MetricsLog> {
        let mut metrics = csv::Writer::from_path(out_dir.join(METRICS_FILE))?;
        metrics.write_record([
            "t",
            "task",
            "recommended_set",
            "recommended_index",
            "own_pulls",
            "induced_pulls",
            "own_on_best",
            "induced_on_best",
            "simple_regret",
            "correct",
            "any_error",
        ])?;
        let mut types = csv::Writer::from_path(out_dir.join(TYPE_PULLS_FILE))?;
        types.write_record([
            "t",
            "task",
            "type",
            "candidate_count",
            "own_pulls",
            "induced_pulls",
            "own_normalized",
            "induced_normalized",
        ])?;
        Ok(MetricsLog { metrics, types })
    }

    pub fn push(&mut self, snapshot: &RoundMetrics) -> Result<()> {
        let any_error = snapshot
            .any_error
            .map(|e| e.to_string())
            .unwrap_or_default();
        for b in &snapshot.bandits {
            self.metrics.write_record([
                snapshot.t.to_string(),
                b.task.to_string(),
                b.recommended_set.to_key(),
                b.recommended_index.to_string(),
                b.own_pulls.to_string(),
                b.induced_pulls.to_string(),
                b.own_on_best.to_string(),
                b.induced_on_best.to_string(),
                b.simple_regret.map(|r| r.to_string()).unwrap_or_default(),
                b.correct.map(|c| c.to_string()).unwrap_or_default(),
                any_error.clone(),
            ])?;
            for tp in &b.type_pulls {
                self.types.write_record([
                    snapshot.t.to_string(),
                    b.task.to_string(),
                    tp.tag.clone(),
                    tp.candidate_count.to_string(),
                    tp.own_pulls.to_string(),
                    tp.induced_pulls.to_string(),
                    tp.own_normalized.to_string(),
                    tp.induced_normalized.to_string(),
                ])?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.metrics.flush()?;
        self.types.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct RecommendationRow {
    pub task: usize,
    pub set: TaskSet,
    pub set_size: usize,
    pub mean: f64,
    pub pulls: u64,
    pub own_pulls: u64,
    pub induced_pulls: u64,
}

pub fn write_recommendations(out_dir: &Path, rows: &[RecommendationRow]) -> Result<()> {
    write_json(&out_dir.join(RECOMMENDATIONS_JSON), &rows)?;
    let mut w = csv::Writer::from_path(out_dir.join(RECOMMENDATIONS_CSV))?;
    w.write_record([
        "task",
        "set",
        "set_size",
        "mean",
        "pulls",
        "own_pulls",
        "induced_pulls",
    ])?;
    for r in rows {
        w.write_record([
            r.task.to_string(),
            r.set.to_key(),
            r.set_size.to_string(),
            r.mean.to_string(),
            r.pulls.to_string(),
            r.own_pulls.to_string(),
            r.induced_pulls.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_recommendations(path: &Path) -> Result<BTreeMap<TaskId, TaskSet>> {
    let rows: Vec<RecommendationRow> = read_json(path)?;
    Ok(rows
        .into_iter()
        .map(|r| (TaskId(r.task), r.set))
        .collect())
}

/// Per-task own/induced pull tallies with the own-to-induced ratio, plus a
/// TOTAL row.
pub fn write_pull_table(
    out_dir: &Path,
    rows: &[(usize, u64, u64)], // (task, own, induced)
) -> Result<()> {
    let mut w = csv::Writer::from_path(out_dir.join(PULL_TABLE_FILE))?;
    w.write_record(["task", "own_pulls", "induced_pulls", "ratio_of_own_pulls"])?;
    let mut total_own = 0u64;
    let mut total_induced = 0u64;
    for &(task, own, induced) in rows {
        total_own += own;
        total_induced += induced;
        w.write_record([
            task.to_string(),
            own.to_string(),
            induced.to_string(),
            auxsel_core::bandit::own_induced_ratio_percent(own, induced),
        ])?;
    }
    w.write_record([
        "TOTAL".to_string(),
        total_own.to_string(),
        total_induced.to_string(),
        auxsel_core::bandit::own_induced_ratio_percent(total_own, total_induced),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_regret(out_dir: &Path, rows: &[RegretRow]) -> Result<()> {
    write_json(&out_dir.join(ORACLE_REGRET_JSON), &rows)?;
    let mut w = csv::Writer::from_path(out_dir.join(ORACLE_REGRET_CSV))?;
    w.write_record(["task", "recommended", "regret", "correct"])?;
    for r in rows {
        w.write_record([
            r.task.index().to_string(),
            r.recommended.to_key(),
            r.regret.to_string(),
            r.correct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn graphs_dir(out_dir: &Path) -> PathBuf {
    out_dir.join(GRAPHS_DIR)
}
