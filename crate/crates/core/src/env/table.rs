//! Mean-table environment: true means come from a file, noise from the same
//! Beta mechanism as the synthetic generator.
//!
//! File format: UTF-8 CSV with header `set,task,aupr,auroc`, `set` encoded
//! as in replay files. Each row gives the ground-truth mean reward pair of
//! one task in one training set.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand_distr::{Beta, Distribution};

use super::{EnvError, Environment, Evaluation, GroundTruth, SplitId};
use crate::rng::{derive_stream, RngStream};
use crate::task::{MetricKind, TaskId, TaskSet};

pub const TABLE_HEADER: [&str; 4] = ["set", "task", "aupr", "auroc"];

const TABLE_SALT: [u64; 2] = [0x54_42_4C_30, 0x54_42_4C_31];

#[derive(Debug, Clone)]
pub struct TableEnv {
    m: usize,
    seed: u64,
    noise_concentration: f64,
    means: BTreeMap<(TaskSet, TaskId), [f64; 2]>,
}

impl TableEnv {
    pub fn from_reader<R: Read>(
        reader: R,
        m: usize,
        seed: u64,
        noise_concentration: f64,
    ) -> Result<TableEnv, EnvError> {
        if !(noise_concentration > 0.0) {
            return Err(EnvError::Model("noise_concentration must be > 0".into()));
        }
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
            if got != TABLE_HEADER {
                return Err(EnvError::Parse {
                    line: 1,
                    message: format!("expected header {:?}, got {:?}", TABLE_HEADER, got),
                });
            }
        }
        let mut means = BTreeMap::new();
        for (idx, row) in csv_reader.records().enumerate() {
            let line = idx + 2;
            let row = row.map_err(|e| EnvError::Parse {
                line,
                message: e.to_string(),
            })?;
            let set = TaskSet::parse_key(&row[0], m).map_err(|e| EnvError::Parse {
                line,
                message: format!("bad set column: {e}"),
            })?;
            let task: usize = row[1].parse().map_err(|_| EnvError::Parse {
                line,
                message: format!("bad task column {:?}", &row[1]),
            })?;
            let mut pair = [0.0f64; 2];
            for (slot, field) in pair.iter_mut().zip([&row[2], &row[3]]) {
                let v: f64 = field.parse().map_err(|_| EnvError::Parse {
                    line,
                    message: format!("bad mean {field:?}"),
                })?;
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(EnvError::Validation {
                        line,
                        message: format!("mean {v} outside [0, 1]"),
                    });
                }
                *slot = v;
            }
            if task >= m || !set.contains(TaskId(task)) {
                return Err(EnvError::Validation {
                    line,
                    message: format!("task {task} not a member of set {}", set.to_key()),
                });
            }
            if means.insert((set, TaskId(task)), pair).is_some() {
                return Err(EnvError::Validation {
                    line,
                    message: format!("duplicate entry for set {} task {task}", set.to_key()),
                });
            }
        }
        Ok(TableEnv {
            m,
            seed,
            noise_concentration,
            means,
        })
    }

    pub fn load(
        path: &Path,
        m: usize,
        seed: u64,
        noise_concentration: f64,
    ) -> Result<TableEnv, EnvError> {
        let file = std::fs::File::open(path)?;
        TableEnv::from_reader(std::io::BufReader::new(file), m, seed, noise_concentration)
    }

    fn mean_of(&self, task: TaskId, set: TaskSet, metric: MetricKind) -> Result<f64, EnvError> {
        if !set.contains(task) {
            return Err(EnvError::TaskNotInSet {
                task,
                set: set.to_key(),
            });
        }
        self.means
            .get(&(set, task))
            .map(|pair| pair[metric.index()].clamp(super::synthetic::MEAN_CLAMP, 1.0 - super::synthetic::MEAN_CLAMP))
            .ok_or(EnvError::TableMiss {
                task,
                set: set.to_key(),
            })
    }
}

impl Environment for TableEnv {
    fn task_count(&self) -> usize {
        self.m
    }

    fn evaluate(&self, set: TaskSet, split: SplitId) -> Result<Evaluation, EnvError> {
        set.require_training_set()?;
        let mut rewards = Vec::with_capacity(set.len());
        for task in set.iter() {
            let mut pair = [0.0f64; 2];
            for (channel, metric) in MetricKind::ALL.into_iter().enumerate() {
                let mu = self.mean_of(task, set, metric)?;
                let stream = derive_stream(&[
                    TABLE_SALT[channel],
                    split.0,
                    task.index() as u64,
                    mu.to_bits(),
                ]);
                let mut rng = RngStream::new(self.seed, stream);
                let dist = Beta::new(
                    mu * self.noise_concentration,
                    (1.0 - mu) * self.noise_concentration,
                )
                .expect("clamped mean keeps Beta parameters positive");
                pair[channel] = dist.sample(&mut rng).clamp(0.0, 1.0);
            }
            rewards.push((task, pair));
        }
        Evaluation::new(set, split, rewards)
    }
}

impl GroundTruth for TableEnv {
    fn true_mean(&self, task: TaskId, set: TaskSet, metric: MetricKind) -> Result<f64, EnvError> {
        self.mean_of(task, set, metric)
    }

    fn true_variance(
        &self,
        task: TaskId,
        set: TaskSet,
        metric: MetricKind,
    ) -> Result<f64, EnvError> {
        let mu = self.mean_of(task, set, metric)?;
        Ok(mu * (1.0 - mu) / (self.noise_concentration + 1.0))
    }
}
