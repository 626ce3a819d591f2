//! Stage 2: generate candidate auxiliary task sets from the transfer graphs.
//!
//! Four search heuristics run from every root task over each of the twelve
//! graphs. Positive-polarity graphs grow a candidate from the root's
//! singleton; negative-polarity graphs shrink the full set by the tasks the
//! search finds (never removing the root itself). Duplicate sets are merged
//! with concatenated provenance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{MetricKind, TaskId, TaskSet};
use crate::transfer::{GraphTest, Polarity, TransferGraph};

#[derive(Debug, Error, PartialEq)]
pub enum CandidateError {
    #[error("expected the 12 canonical graphs, got {0}")]
    WrongGraphCount(usize),
    #[error("missing graph {0}")]
    MissingGraph(String),
    #[error("graph {tag} is over {got} tasks, expected {expected}")]
    GraphSizeMismatch {
        tag: String,
        got: usize,
        expected: usize,
    },
}

/// The four candidate-search heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Direct in-neighbours of the root.
    Neighbours,
    /// All ancestors of the root (transitive closure of in-edges).
    Transitive,
    /// Ancestors after restricting the graph to a maximum-weight spanning
    /// forest of its undirected projection.
    FilteredTransitive,
    /// Largest clique of the bidirectional core containing the root.
    Clique,
}

impl SearchMethod {
    pub const ALL: [SearchMethod; 4] = [
        SearchMethod::Neighbours,
        SearchMethod::Transitive,
        SearchMethod::FilteredTransitive,
        SearchMethod::Clique,
    ];
}

impl std::fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchMethod::Neighbours => f.write_str("neighbours"),
            SearchMethod::Transitive => f.write_str("transitive"),
            SearchMethod::FilteredTransitive => f.write_str("filtered_transitive"),
            SearchMethod::Clique => f.write_str("clique"),
        }
    }
}

/// Where a candidate came from: one entry per (graph, search, root) that
/// produced it.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct Provenance {
    pub metric: MetricKind,
    pub polarity: Polarity,
    pub test: GraphTest,
    pub search: SearchMethod,
    pub root: TaskId,
}

/// A deduplicated candidate auxiliary task set with full generation history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub set: TaskSet,
    pub provenance: Vec<Provenance>,
}

/// Applies the polarity rule: positive candidates grow from the root,
/// negative candidates remove the found tasks (except the root) from the
/// full set.
fn combine(polarity: Polarity, root: TaskId, found: TaskSet, m: usize) -> TaskSet {
    match polarity {
        Polarity::Positive => found.with(root),
        Polarity::Negative => TaskSet::full(m)
            .difference(found.without(root))
            .with(root),
    }
}

/// S1: the inward-pointing star around the root.
pub fn search_neighbours(graph: &TransferGraph, root: TaskId) -> TaskSet {
    let mut found = TaskSet::EMPTY;
    for p in (0..graph.m).map(TaskId) {
        if p != root && graph.edge(p, root) {
            found = found.with(p);
        }
    }
    combine(graph.polarity, root, found, graph.m)
}

fn ancestors(m: usize, edge: impl Fn(TaskId, TaskId) -> bool, root: TaskId) -> TaskSet {
    let mut found = TaskSet::EMPTY;
    let mut queue = vec![root];
    while let Some(x) = queue.pop() {
        for p in (0..m).map(TaskId) {
            if p != x && edge(p, x) && !found.contains(p) {
                found = found.with(p);
                queue.push(p);
            }
        }
    }
    found
}

/// S2: every task with a directed path into the root.
pub fn search_transitive(graph: &TransferGraph, root: TaskId) -> TaskSet {
    let found = ancestors(graph.m, |p, q| graph.edge(p, q), root);
    combine(graph.polarity, root, found, graph.m)
}

/// Undirected maximum-weight spanning forest of the graph's projection.
///
/// Projected edge weights are the largest absolute directed weight among the
/// existing directed edges of the pair. Kruskal processes edges by weight
/// descending, breaking ties by (min endpoint, max endpoint) ascending.
fn spanning_forest_pairs(graph: &TransferGraph) -> Vec<(usize, usize)> {
    let m = graph.m;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for p in 0..m {
        for q in (p + 1)..m {
            let (tp, tq) = (TaskId(p), TaskId(q));
            let mut weight = f64::NEG_INFINITY;
            if graph.edge(tp, tq) {
                weight = weight.max(graph.weight(tp, tq).abs());
            }
            if graph.edge(tq, tp) {
                weight = weight.max(graph.weight(tq, tp).abs());
            }
            if weight > f64::NEG_INFINITY {
                edges.push((p, q, weight));
            }
        }
    }
    edges.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });

    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        if parent[x] != x {
            parent[x] = find(parent, parent[x]);
        }
        parent[x]
    }
    let mut kept = Vec::new();
    for (p, q, _) in edges {
        let (rp, rq) = (find(&mut parent, p), find(&mut parent, q));
        if rp != rq {
            parent[rp] = rq;
            kept.push((p, q));
        }
    }
    kept
}

/// S3: transitive search on the graph filtered to directed edges whose
/// undirected image survives the maximum-weight spanning forest.
pub fn search_filtered_transitive(graph: &TransferGraph, root: TaskId) -> TaskSet {
    let forest: std::collections::BTreeSet<(usize, usize)> =
        spanning_forest_pairs(graph).into_iter().collect();
    let edge = |p: TaskId, q: TaskId| {
        graph.edge(p, q)
            && forest.contains(&(p.index().min(q.index()), p.index().max(q.index())))
    };
    let found = ancestors(graph.m, edge, root);
    combine(graph.polarity, root, found, graph.m)
}

/// Maximum clique of the bidirectional core containing `root`; among equal
/// sizes the lexicographically smallest member list wins.
fn max_clique_containing(und: &[Vec<bool>], root: usize) -> Vec<usize> {
    let m = und.len();
    let base: Vec<usize> = (0..m).filter(|&v| v != root && und[root][v]).collect();
    let mut best = vec![root];

    fn consider(best: &mut Vec<usize>, current: &[usize]) {
        let mut sorted = current.to_vec();
        sorted.sort_unstable();
        let mut best_sorted = best.clone();
        best_sorted.sort_unstable();
        if sorted.len() > best_sorted.len()
            || (sorted.len() == best_sorted.len() && sorted < best_sorted)
        {
            *best = sorted;
        }
    }

    fn expand(und: &[Vec<bool>], best: &mut Vec<usize>, current: &mut Vec<usize>, cands: &[usize]) {
        consider(best, current);
        // equal sizes still matter for the lexicographic tie-break, so prune
        // only strictly-smaller bounds
        if current.len() + cands.len() < best.len() {
            return;
        }
        for (i, &v) in cands.iter().enumerate() {
            let next: Vec<usize> = cands[i + 1..]
                .iter()
                .copied()
                .filter(|&w| und[v][w])
                .collect();
            current.push(v);
            expand(und, best, current, &next);
            current.pop();
        }
    }

    expand(und, &mut best, &mut vec![root], &base);
    best
}

/// S4: clique search over edges present in both directions.
pub fn search_clique(graph: &TransferGraph, root: TaskId) -> TaskSet {
    let m = graph.m;
    let und: Vec<Vec<bool>> = (0..m)
        .map(|p| {
            (0..m)
                .map(|q| p != q && graph.edge(TaskId(p), TaskId(q)) && graph.edge(TaskId(q), TaskId(p)))
                .collect()
        })
        .collect();
    let clique = max_clique_containing(&und, root.index());
    let mut found = TaskSet::EMPTY;
    for v in clique {
        found = found.with(TaskId(v));
    }
    combine(graph.polarity, root, found, graph.m)
}

pub fn run_search(graph: &TransferGraph, method: SearchMethod, root: TaskId) -> TaskSet {
    match method {
        SearchMethod::Neighbours => search_neighbours(graph, root),
        SearchMethod::Transitive => search_transitive(graph, root),
        SearchMethod::FilteredTransitive => search_filtered_transitive(graph, root),
        SearchMethod::Clique => search_clique(graph, root),
    }
}

/// Output of candidate generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateOutcome {
    pub candidates: Vec<Candidate>,
    /// Search runs before deduplication (4 searches x 12 graphs x M roots).
    pub raw_generated: usize,
}

/// Runs all searches over all twelve graphs and every root, deduplicating
/// by task set. Output order is deterministic: candidates sorted by set,
/// provenance sorted within each candidate.
pub fn generate_arms(
    graphs: &[TransferGraph],
    m: usize,
) -> Result<GenerateOutcome, CandidateError> {
    if graphs.len() != 12 {
        return Err(CandidateError::WrongGraphCount(graphs.len()));
    }
    let mut ordered: BTreeMap<(MetricKind, Polarity, GraphTest), &TransferGraph> = BTreeMap::new();
    for g in graphs {
        if g.m != m {
            return Err(CandidateError::GraphSizeMismatch {
                tag: g.tag(),
                got: g.m,
                expected: m,
            });
        }
        ordered.insert((g.metric, g.polarity, g.test), g);
    }
    for metric in MetricKind::ALL {
        for polarity in Polarity::ALL {
            for test in GraphTest::ALL {
                if !ordered.contains_key(&(metric, polarity, test)) {
                    return Err(CandidateError::MissingGraph(format!(
                        "{metric}_{polarity}_{test}"
                    )));
                }
            }
        }
    }

    let mut by_set: BTreeMap<TaskSet, Vec<Provenance>> = BTreeMap::new();
    let mut raw_generated = 0usize;
    for ((metric, polarity, test), graph) in &ordered {
        for root in (0..m).map(TaskId) {
            for search in SearchMethod::ALL {
                let set = run_search(graph, search, root);
                raw_generated += 1;
                by_set.entry(set).or_default().push(Provenance {
                    metric: *metric,
                    polarity: *polarity,
                    test: *test,
                    search,
                    root,
                });
            }
        }
    }

    let candidates = by_set
        .into_iter()
        .map(|(set, mut provenance)| {
            provenance.sort();
            Candidate { set, provenance }
        })
        .collect();
    Ok(GenerateOutcome {
        candidates,
        raw_generated,
    })
}
