//! Task identifiers, canonical task sets, and the base-case scenario families.
//!
//! A [`TaskSet`] is a bitmask over at most 64 tasks, so set equality is word
//! equality and iteration is always in ascending task order.

use std::fmt;

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Hard upper bound on the number of tasks in an instance.
pub const MAX_TASKS: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("task id {id} out of range for instance with {m} tasks")]
    IdOutOfRange { id: usize, m: usize },
    #[error("instance task count {m} not in 2..={MAX_TASKS}")]
    BadTaskCount { m: usize },
    #[error("empty task set used where a training set is required")]
    EmptyTrainingSet,
}

/// Index of a single task, in `[0, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub usize);

impl TaskId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Canonical subset of tasks, encoded as a 64-bit mask.
///
/// Two sets with the same members are always bit-identical, iteration yields
/// ascending [`TaskId`]s, and ordering is lexicographic over the ascending
/// member list. Serializes to JSON as a sorted integer array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TaskSet(u64);

impl TaskSet {
    pub const EMPTY: TaskSet = TaskSet(0);

    /// Builds a set from task ids, collapsing duplicates.
    pub fn from_ids<I: IntoIterator<Item = usize>>(ids: I, m: usize) -> Result<TaskSet, TaskError> {
        check_task_count(m)?;
        let mut bits = 0u64;
        for id in ids {
            if id >= m {
                return Err(TaskError::IdOutOfRange { id, m });
            }
            bits |= 1u64 << id;
        }
        Ok(TaskSet(bits))
    }

    pub fn singleton(id: TaskId) -> TaskSet {
        TaskSet(1u64 << id.0)
    }

    /// The full set `{0, .., m-1}`.
    pub fn full(m: usize) -> TaskSet {
        if m == MAX_TASKS {
            TaskSet(u64::MAX)
        } else {
            TaskSet((1u64 << m) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> TaskSet {
        TaskSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, id: TaskId) -> bool {
        self.0 & (1u64 << id.0) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, id: TaskId) -> TaskSet {
        TaskSet(self.0 | (1u64 << id.0))
    }

    pub fn without(self, id: TaskId) -> TaskSet {
        TaskSet(self.0 & !(1u64 << id.0))
    }

    pub fn union(self, other: TaskSet) -> TaskSet {
        TaskSet(self.0 | other.0)
    }

    pub fn difference(self, other: TaskSet) -> TaskSet {
        TaskSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: TaskSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Ascending iteration over members.
    pub fn iter(self) -> TaskSetIter {
        TaskSetIter(self.0)
    }

    pub fn members(self) -> Vec<TaskId> {
        self.iter().collect()
    }

    /// Hyphen-joined member list, e.g. `0-3-7`; used in CSV set columns.
    pub fn to_key(self) -> String {
        let parts: Vec<String> = self.iter().map(|t| t.0.to_string()).collect();
        parts.join("-")
    }

    /// Parses a hyphen-joined member list.
    pub fn parse_key(key: &str, m: usize) -> Result<TaskSet, TaskError> {
        let mut ids = Vec::new();
        for part in key.split('-') {
            let id: usize = part
                .trim()
                .parse()
                .map_err(|_| TaskError::IdOutOfRange { id: usize::MAX, m })?;
            ids.push(id);
        }
        TaskSet::from_ids(ids, m)
    }

    /// Errors if the set is empty; training sets must be non-empty.
    pub fn require_training_set(self) -> Result<TaskSet, TaskError> {
        if self.is_empty() {
            Err(TaskError::EmptyTrainingSet)
        } else {
            Ok(self)
        }
    }
}

impl PartialOrd for TaskSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TaskSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.iter().cmp(other.iter())
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for t in self.iter() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone)]
pub struct TaskSetIter(u64);

impl Iterator for TaskSetIter {
    type Item = TaskId;

    fn next(&mut self) -> Option<TaskId> {
        if self.0 == 0 {
            None
        } else {
            let id = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(TaskId(id))
        }
    }
}

impl Serialize for TaskSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for t in self.iter() {
            seq.serialize_element(&t.0)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for TaskSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = TaskSet;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a sorted array of task ids")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<TaskSet, A::Error> {
                let mut bits = 0u64;
                while let Some(id) = seq.next_element::<usize>()? {
                    if id >= MAX_TASKS {
                        return Err(serde::de::Error::custom(format!(
                            "task id {id} exceeds the {MAX_TASKS}-task limit"
                        )));
                    }
                    bits |= 1u64 << id;
                }
                Ok(TaskSet(bits))
            }
        }
        deserializer.deserialize_seq(V)
    }
}

/// Performance channels produced by one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Aupr,
    Auroc,
}

impl MetricKind {
    pub const ALL: [MetricKind; 2] = [MetricKind::Aupr, MetricKind::Auroc];

    pub fn index(self) -> usize {
        match self {
            MetricKind::Aupr => 0,
            MetricKind::Auroc => 1,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Aupr => f.write_str("aupr"),
            MetricKind::Auroc => f.write_str("auroc"),
        }
    }
}

/// The four base-case training scenario families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Single-task: `{m}` for each task.
    Stl,
    /// Pairwise: every unordered pair `{p, q}`.
    Pw,
    /// Full multi-task: the one full set.
    Fmtl,
    /// Leave-one-out: the full set minus one task, for each task.
    Loo,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Stl,
        ScenarioKind::Pw,
        ScenarioKind::Fmtl,
        ScenarioKind::Loo,
    ];
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::Stl => f.write_str("stl"),
            ScenarioKind::Pw => f.write_str("pw"),
            ScenarioKind::Fmtl => f.write_str("fmtl"),
            ScenarioKind::Loo => f.write_str("loo"),
        }
    }
}

fn check_task_count(m: usize) -> Result<(), TaskError> {
    if (2..=MAX_TASKS).contains(&m) {
        Ok(())
    } else {
        Err(TaskError::BadTaskCount { m })
    }
}

/// Enumerates one scenario family for an `m`-task instance.
///
/// STL yields `m` singletons, PW all `m(m-1)/2` unordered pairs, FMTL the
/// single full set, and LOO the `m` sets each omitting one task (in omitted-
/// task order).
pub fn scenario_family(kind: ScenarioKind, m: usize) -> Result<Vec<TaskSet>, TaskError> {
    check_task_count(m)?;
    let full = TaskSet::full(m);
    let sets = match kind {
        ScenarioKind::Stl => (0..m).map(|i| TaskSet::singleton(TaskId(i))).collect(),
        ScenarioKind::Pw => {
            let mut out = Vec::with_capacity(m * (m - 1) / 2);
            for p in 0..m {
                for q in (p + 1)..m {
                    out.push(TaskSet::singleton(TaskId(p)).with(TaskId(q)));
                }
            }
            out
        }
        ScenarioKind::Fmtl => vec![full],
        ScenarioKind::Loo => (0..m).map(|i| full.without(TaskId(i))).collect(),
    };
    Ok(sets)
}

/// All base-case sets across the four families, deduplicated and sorted.
pub fn base_case_sets(m: usize) -> Result<Vec<TaskSet>, TaskError> {
    let mut sets = Vec::new();
    for kind in ScenarioKind::ALL {
        sets.extend(scenario_family(kind, m)?);
    }
    sets.sort();
    sets.dedup();
    Ok(sets)
}

/// Families a base-case set belongs to (a set can sit in several for small `m`).
pub fn scenario_memberships(set: TaskSet, m: usize) -> Vec<ScenarioKind> {
    let full = TaskSet::full(m);
    let mut kinds = Vec::new();
    if set.len() == 1 {
        kinds.push(ScenarioKind::Stl);
    }
    if set.len() == 2 {
        kinds.push(ScenarioKind::Pw);
    }
    if set == full {
        kinds.push(ScenarioKind::Fmtl);
    }
    if set.len() == m - 1 && set.is_subset_of(full) {
        kinds.push(ScenarioKind::Loo);
    }
    kinds
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_ids_collapses_duplicates() {
        let s = TaskSet::from_ids([0, 2, 2], 4).unwrap();
        assert_eq!(s.members(), vec![TaskId(0), TaskId(2)]);
    }

    #[test]
    fn from_ids_empty_is_valid_value_invalid_training_set() {
        let s = TaskSet::from_ids([], 4).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.require_training_set(), Err(TaskError::EmptyTrainingSet));
    }

    #[test]
    fn iteration_is_canonical_ascending() {
        let s = TaskSet::from_ids([3, 1, 0], 4).unwrap();
        assert_eq!(
            s.iter().map(TaskId::index).collect::<Vec<_>>(),
            vec![0, 1, 3]
        );
    }

    #[test]
    fn out_of_range_id_rejected() {
        assert_eq!(
            TaskSet::from_ids([4], 4),
            Err(TaskError::IdOutOfRange { id: 4, m: 4 })
        );
    }

    #[test]
    fn canonical_equality_is_set_equality() {
        let a = TaskSet::from_ids([2, 0, 1], 5).unwrap();
        let b = TaskSet::from_ids([1, 1, 0, 2], 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ordering_is_lexicographic_over_members() {
        let a = TaskSet::from_ids([0, 3], 5).unwrap();
        let b = TaskSet::from_ids([2], 5).unwrap();
        assert!(a < b); // [0,3] < [2]
        let c = TaskSet::from_ids([0], 5).unwrap();
        assert!(c < a); // prefix comes first
    }

    #[test]
    fn scenario_counts_match_closed_forms() {
        for m in 2..=MAX_TASKS {
            assert_eq!(scenario_family(ScenarioKind::Stl, m).unwrap().len(), m);
            assert_eq!(
                scenario_family(ScenarioKind::Pw, m).unwrap().len(),
                m * (m - 1) / 2
            );
            assert_eq!(scenario_family(ScenarioKind::Fmtl, m).unwrap().len(), 1);
            assert_eq!(scenario_family(ScenarioKind::Loo, m).unwrap().len(), m);
        }
    }

    #[test]
    fn paper_instance_has_276_base_cases() {
        let total: usize = ScenarioKind::ALL
            .iter()
            .map(|&k| scenario_family(k, 22).unwrap().len())
            .sum();
        assert_eq!(total, 22 + 231 + 1 + 22);
        assert_eq!(total, 276);
        // All 276 are distinct at m=22.
        assert_eq!(base_case_sets(22).unwrap().len(), 276);
    }

    #[test]
    fn m2_families_overlap_to_three_unique_sets() {
        let total: usize = ScenarioKind::ALL
            .iter()
            .map(|&k| scenario_family(k, 2).unwrap().len())
            .sum();
        assert_eq!(total, 6);
        assert_eq!(base_case_sets(2).unwrap().len(), 3);
    }

    #[test]
    fn loo_m3_omits_each_task() {
        let sets = scenario_family(ScenarioKind::Loo, 3).unwrap();
        let expect = [
            TaskSet::from_ids([1, 2], 3).unwrap(),
            TaskSet::from_ids([0, 2], 3).unwrap(),
            TaskSet::from_ids([0, 1], 3).unwrap(),
        ];
        assert_eq!(sets, expect);
    }

    #[test]
    fn key_round_trip() {
        let s = TaskSet::from_ids([0, 3, 7], 8).unwrap();
        assert_eq!(s.to_key(), "0-3-7");
        assert_eq!(TaskSet::parse_key("0-3-7", 8).unwrap(), s);
    }

    #[test]
    fn json_round_trip_is_sorted_array() {
        let s = TaskSet::from_ids([5, 1], 8).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(js, "[1,5]");
        let back: TaskSet = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }
}
