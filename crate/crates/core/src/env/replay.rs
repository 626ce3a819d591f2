//! Replay environment: answers evaluations from a CSV of recorded results.
//!
//! File format: UTF-8, LF line endings, header `set,split,task,aupr,auroc`.
//! The `set` column is the hyphen-joined ascending member list (`0-3-7`).
//! One row holds one task's reward pair; a complete record for
//! `(set, split)` consists of one row per member task.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{EnvError, Environment, Evaluation, SplitId};
use crate::task::{TaskId, TaskSet};

pub const REPLAY_HEADER: [&str; 5] = ["set", "split", "task", "aupr", "auroc"];

#[derive(Debug, Clone)]
pub struct ReplayEnv {
    m: usize,
    records: BTreeMap<(TaskSet, u64), Vec<(TaskId, [f64; 2])>>,
}

/// Which sets are covered and by how many splits each.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ReplayCoverage {
    pub sets: Vec<(String, u64)>,
    pub total_records: u64,
}

impl ReplayEnv {
    pub fn from_reader<R: Read>(reader: R, m: usize) -> Result<ReplayEnv, EnvError> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        {
            let headers = csv_reader
                .headers()
                .map_err(|e| EnvError::Parse {
                    line: 1,
                    message: e.to_string(),
                })?
                .clone();
            let got: Vec<&str> = headers.iter().collect();
            if got != REPLAY_HEADER {
                return Err(EnvError::Parse {
                    line: 1,
                    message: format!("expected header {:?}, got {:?}", REPLAY_HEADER, got),
                });
            }
        }

        let mut records: BTreeMap<(TaskSet, u64), Vec<(TaskId, [f64; 2])>> = BTreeMap::new();
        for (idx, row) in csv_reader.records().enumerate() {
            let line = idx + 2; // 1-based, after the header
            let row = row.map_err(|e| EnvError::Parse {
                line,
                message: e.to_string(),
            })?;
            if row.len() != 5 {
                return Err(EnvError::Parse {
                    line,
                    message: format!("expected 5 fields, got {}", row.len()),
                });
            }
            let set = TaskSet::parse_key(&row[0], m).map_err(|e| EnvError::Parse {
                line,
                message: format!("bad set column {:?}: {e}", &row[0]),
            })?;
            let split: u64 = row[1].parse().map_err(|_| EnvError::Parse {
                line,
                message: format!("bad split column {:?}", &row[1]),
            })?;
            let task: usize = row[2].parse().map_err(|_| EnvError::Parse {
                line,
                message: format!("bad task column {:?}", &row[2]),
            })?;
            let parse_reward = |field: &str| -> Result<f64, EnvError> {
                let v: f64 = field.parse().map_err(|_| EnvError::Parse {
                    line,
                    message: format!("bad reward {field:?}"),
                })?;
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(EnvError::Validation {
                        line,
                        message: format!("reward {v} outside [0, 1]"),
                    });
                }
                Ok(v)
            };
            let aupr = parse_reward(&row[3])?;
            let auroc = parse_reward(&row[4])?;
            if task >= m || !set.contains(TaskId(task)) {
                return Err(EnvError::Validation {
                    line,
                    message: format!("task {task} not a member of set {}", set.to_key()),
                });
            }
            let entry = records.entry((set, split)).or_default();
            if entry.iter().any(|(t, _)| t.index() == task) {
                return Err(EnvError::Validation {
                    line,
                    message: format!(
                        "duplicate record for set {} split {split} task {task}",
                        set.to_key()
                    ),
                });
            }
            entry.push((TaskId(task), [aupr, auroc]));
        }

        // every record must cover exactly its set's members
        for ((set, split), rewards) in &mut records {
            rewards.sort_by_key(|(t, _)| *t);
            let members = set.members();
            if rewards.len() != members.len() {
                return Err(EnvError::Validation {
                    line: 0,
                    message: format!(
                        "set {} split {split} covers {} of {} member tasks",
                        set.to_key(),
                        rewards.len(),
                        members.len()
                    ),
                });
            }
        }

        Ok(ReplayEnv { m, records })
    }

    pub fn load(path: &Path, m: usize) -> Result<ReplayEnv, EnvError> {
        let file = std::fs::File::open(path)?;
        ReplayEnv::from_reader(std::io::BufReader::new(file), m)
    }

    pub fn coverage(&self) -> ReplayCoverage {
        let mut per_set: BTreeMap<TaskSet, u64> = BTreeMap::new();
        for (set, _) in self.records.keys() {
            *per_set.entry(*set).or_insert(0) += 1;
        }
        ReplayCoverage {
            sets: per_set
                .into_iter()
                .map(|(s, n)| (s.to_key(), n))
                .collect(),
            total_records: self.records.len() as u64,
        }
    }

    /// The `(set, split)` pairs from `wanted` that have no record.
    pub fn missing(&self, wanted: impl Iterator<Item = (TaskSet, SplitId)>) -> Vec<(TaskSet, SplitId)> {
        wanted
            .filter(|(set, split)| !self.records.contains_key(&(*set, split.0)))
            .collect()
    }
}

impl Environment for ReplayEnv {
    fn task_count(&self) -> usize {
        self.m
    }

    fn evaluate(&self, set: TaskSet, split: SplitId) -> Result<Evaluation, EnvError> {
        let rewards = self
            .records
            .get(&(set, split.0))
            .ok_or_else(|| EnvError::ReplayMiss {
                set: set.to_key(),
                split: split.0,
            })?
            .clone();
        Evaluation::new(set, split, rewards)
    }
}

/// Writes evaluations in the replay CSV format (the inverse of loading).
pub fn write_replay_csv<W: Write>(
    writer: W,
    evaluations: impl Iterator<Item = Evaluation>,
) -> Result<(), EnvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPLAY_HEADER)
        .map_err(|e| EnvError::Io(std::io::Error::other(e)))?;
    for ev in evaluations {
        let key = ev.trained_set.to_key();
        for (task, [aupr, auroc]) in &ev.rewards {
            w.write_record([
                key.as_str(),
                &ev.split.0.to_string(),
                &task.index().to_string(),
                &format!("{aupr}"),
                &format!("{auroc}"),
            ])
            .map_err(|e| EnvError::Io(std::io::Error::other(e)))?;
        }
    }
    w.flush()?;
    Ok(())
}
