//! Synthetic ground-truth generator.
//!
//! The true mean reward of task `m` trained with set `S` is
//!
//! ```text
//! mu(m, S) = clamp(beta_m + saturate(sum_{p in S, p != m} gamma_pm))
//! saturate(x) = saturation * tanh(x / saturation)
//! ```
//!
//! clamped to `[1e-6, 1 - 1e-6]`. The AUROC channel is the AUPR mean plus a
//! fixed offset (clamped again). Observed rewards are Beta-distributed with
//! the channel mean and concentration `kappa`, so they live in [0, 1] by
//! construction; AUROC draws mix a share of the AUPR draw (weight
//! `metric_mixing`) with an independent draw, which correlates the channels
//! without moving their means.
//!
//! Noise streams are keyed by `(seed, split, task, channel, channel mean)`.
//! Keying on the mean rather than the set identity makes configurations with
//! identical ground truth produce identical draws on the same split, so a
//! comparison between two truly-equal scenarios ties exactly instead of
//! flipping sign on residual noise; distinct means draw independently.

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, Evaluation, GroundTruth, SplitId};
use crate::rng::{derive_stream, RngStream};
use crate::task::{MetricKind, TaskId, TaskSet, MAX_TASKS};

/// Clamp bound keeping Beta parameters strictly positive.
pub const MEAN_CLAMP: f64 = 1e-6;

const CHANNEL_SALT: [u64; 2] = [0x41_55_50_52, 0x41_55_52_4F];

fn clamp_mean(x: f64) -> f64 {
    x.clamp(MEAN_CLAMP, 1.0 - MEAN_CLAMP)
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Parameters of the synthetic reward model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticModel {
    /// Per-task single-task mean (beta_m), each in [0, 1].
    pub base: Vec<f64>,
    /// `transfer[p][q]`: effect of including task p on target q; may be
    /// negative. The diagonal is ignored.
    pub transfer: Vec<Vec<f64>>,
    /// Saturation scale of the additive transfer; large values make the
    /// model effectively linear.
    pub saturation: f64,
    /// Beta concentration kappa; reward variance is mu(1-mu)/(kappa+1).
    pub noise_concentration: f64,
    /// Fixed shift of the AUROC channel mean relative to AUPR.
    #[serde(default)]
    pub metric_offset: f64,
    /// Weight in [0, 1] of the shared (AUPR-derived) component in AUROC
    /// draws; 0 = independent channels.
    #[serde(default)]
    pub metric_mixing: f64,
}

impl SyntheticModel {
    /// A model with no transfer effects and near-linear saturation.
    pub fn flat(base: Vec<f64>, noise_concentration: f64) -> SyntheticModel {
        let m = base.len();
        SyntheticModel {
            base,
            transfer: vec![vec![0.0; m]; m],
            saturation: 1e6,
            noise_concentration,
            metric_offset: 0.0,
            metric_mixing: 0.0,
        }
    }

    pub fn task_count(&self) -> usize {
        self.base.len()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let m = self.base.len();
        if !(2..=MAX_TASKS).contains(&m) {
            return Err(EnvError::Model(format!(
                "base vector has {m} entries; need 2..={MAX_TASKS}"
            )));
        }
        if self.base.iter().any(|b| !b.is_finite() || !(0.0..=1.0).contains(b)) {
            return Err(EnvError::Model("base means must lie in [0, 1]".into()));
        }
        if self.transfer.len() != m || self.transfer.iter().any(|row| row.len() != m) {
            return Err(EnvError::Model(format!("transfer matrix must be {m}x{m}")));
        }
        if self
            .transfer
            .iter()
            .flatten()
            .any(|g| !g.is_finite())
        {
            return Err(EnvError::Model("transfer entries must be finite".into()));
        }
        if !(self.saturation > 0.0) {
            return Err(EnvError::Model("saturation must be > 0".into()));
        }
        if !(self.noise_concentration > 0.0) {
            return Err(EnvError::Model("noise_concentration must be > 0".into()));
        }
        if !self.metric_offset.is_finite() {
            return Err(EnvError::Model("metric_offset must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.metric_mixing) {
            return Err(EnvError::Model("metric_mixing must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn saturate(&self, x: f64) -> f64 {
        self.saturation * (x / self.saturation).tanh()
    }

    /// Ground-truth mean of `task` when trained jointly with `set`.
    pub fn true_mean(
        &self,
        task: TaskId,
        set: TaskSet,
        metric: MetricKind,
    ) -> Result<f64, EnvError> {
        if !set.contains(task) {
            return Err(EnvError::TaskNotInSet {
                task,
                set: set.to_key(),
            });
        }
        let mut effect = 0.0;
        for p in set.iter() {
            if p != task {
                effect += self.transfer[p.index()][task.index()];
            }
        }
        let aupr = clamp_mean(self.base[task.index()] + self.saturate(effect));
        Ok(match metric {
            MetricKind::Aupr => aupr,
            MetricKind::Auroc => clamp_mean(aupr + self.metric_offset),
        })
    }

    /// Design variance of one reward draw: the Beta variance per channel,
    /// with AUROC combining the shared and independent components. Clamp
    /// effects on the shared component are ignored (offsets are assumed to
    /// keep means inside the clamp band).
    pub fn true_variance(
        &self,
        task: TaskId,
        set: TaskSet,
        metric: MetricKind,
    ) -> Result<f64, EnvError> {
        let beta_var = |mu: f64| mu * (1.0 - mu) / (self.noise_concentration + 1.0);
        let aupr = self.true_mean(task, set, MetricKind::Aupr)?;
        Ok(match metric {
            MetricKind::Aupr => beta_var(aupr),
            MetricKind::Auroc => {
                let roc = self.true_mean(task, set, MetricKind::Auroc)?;
                let w = self.metric_mixing;
                w * w * beta_var(aupr) + (1.0 - w) * (1.0 - w) * beta_var(roc)
            }
        })
    }
}

/// Synthetic environment: the model plus a base seed.
#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    model: SyntheticModel,
    seed: u64,
}

impl SyntheticEnv {
    pub fn new(model: SyntheticModel, seed: u64) -> Result<SyntheticEnv, EnvError> {
        model.validate()?;
        Ok(SyntheticEnv { model, seed })
    }

    pub fn model(&self) -> &SyntheticModel {
        &self.model
    }

    fn draw_beta(&self, mu: f64, split: SplitId, task: TaskId, channel: usize) -> f64 {
        let kappa = self.model.noise_concentration;
        let stream = derive_stream(&[
            CHANNEL_SALT[channel],
            split.0,
            task.index() as u64,
            mu.to_bits(),
        ]);
        let mut rng = RngStream::new(self.seed, stream);
        let dist = Beta::new(mu * kappa, (1.0 - mu) * kappa)
            .expect("clamped mean keeps Beta parameters positive");
        clamp_unit(dist.sample(&mut rng))
    }
}

impl Environment for SyntheticEnv {
    fn task_count(&self) -> usize {
        self.model.task_count()
    }

    fn evaluate(&self, set: TaskSet, split: SplitId) -> Result<Evaluation, EnvError> {
        set.require_training_set()?;
        let w = self.model.metric_mixing;
        let mut rewards = Vec::with_capacity(set.len());
        for task in set.iter() {
            let mu_aupr = self.model.true_mean(task, set, MetricKind::Aupr)?;
            let mu_roc = self.model.true_mean(task, set, MetricKind::Auroc)?;
            let x_aupr = self.draw_beta(mu_aupr, split, task, 0);
            let indep = self.draw_beta(mu_roc, split, task, 1);
            let shared = clamp_unit(x_aupr + self.model.metric_offset);
            let x_roc = w * shared + (1.0 - w) * indep;
            rewards.push((task, [x_aupr, x_roc]));
        }
        Evaluation::new(set, split, rewards)
    }
}

impl GroundTruth for SyntheticEnv {
    fn true_mean(&self, task: TaskId, set: TaskSet, metric: MetricKind) -> Result<f64, EnvError> {
        self.model.true_mean(task, set, metric)
    }

    fn true_variance(
        &self,
        task: TaskId,
        set: TaskSet,
        metric: MetricKind,
    ) -> Result<f64, EnvError> {
        self.model.true_variance(task, set, metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ids(v: &[usize], m: usize) -> TaskSet {
        TaskSet::from_ids(v.iter().copied(), m).unwrap()
    }

    #[test]
    fn zero_transfer_mean_is_base() {
        let model = SyntheticModel::flat(vec![0.3, 0.5, 0.7], 150.0);
        for s in [ids(&[0], 3), ids(&[0, 1], 3), ids(&[0, 1, 2], 3)] {
            assert_eq!(
                model.true_mean(TaskId(0), s, MetricKind::Aupr).unwrap(),
                0.3
            );
        }
    }

    #[test]
    fn pairwise_effect_passes_through_tanh() {
        let mut model = SyntheticModel::flat(vec![0.5, 0.5, 0.5], 150.0);
        model.saturation = 1.0;
        model.transfer[1][0] = 0.2;
        let mu = model
            .true_mean(TaskId(0), ids(&[0, 1], 3), MetricKind::Aupr)
            .unwrap();
        assert_abs_diff_eq!(mu, 0.5 + 0.2f64.tanh(), epsilon = 1e-12);
        assert_abs_diff_eq!(mu, 0.69737, epsilon = 1e-5);
    }

    #[test]
    fn saturation_caps_large_effects() {
        let mut model = SyntheticModel::flat(vec![0.2, 0.2], 150.0);
        model.saturation = 0.3;
        model.transfer[1][0] = 10.0;
        let mu = model
            .true_mean(TaskId(0), ids(&[0, 1], 2), MetricKind::Aupr)
            .unwrap();
        assert_abs_diff_eq!(mu, 0.2 + 0.3 * (10.0f64 / 0.3).tanh(), epsilon = 1e-12);
        assert_abs_diff_eq!(mu, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn means_clamp_near_one() {
        let mut model = SyntheticModel::flat(vec![0.9, 0.5], 150.0);
        model.transfer[1][0] = 0.3;
        let mu = model
            .true_mean(TaskId(0), ids(&[0, 1], 2), MetricKind::Aupr)
            .unwrap();
        assert_eq!(mu, 1.0 - MEAN_CLAMP);
    }

    #[test]
    fn task_outside_set_rejected() {
        let model = SyntheticModel::flat(vec![0.5, 0.5], 150.0);
        assert!(model
            .true_mean(TaskId(1), ids(&[0], 2), MetricKind::Aupr)
            .is_err());
    }

    #[test]
    fn huge_concentration_collapses_noise() {
        let model = SyntheticModel::flat(vec![0.4, 0.6], 1e9);
        let env = SyntheticEnv::new(model, 11).unwrap();
        let ev = env.evaluate(ids(&[0], 2), SplitId(0)).unwrap();
        assert_abs_diff_eq!(ev.reward(TaskId(0), MetricKind::Aupr).unwrap(), 0.4, epsilon = 1e-3);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let model = SyntheticModel::flat(vec![0.4, 0.6, 0.5], 150.0);
        let env = SyntheticEnv::new(model, 99).unwrap();
        let a = env.evaluate(ids(&[0, 2], 3), SplitId(5)).unwrap();
        let b = env.evaluate(ids(&[0, 2], 3), SplitId(5)).unwrap();
        assert_eq!(a, b);
        let c = env.evaluate(ids(&[0, 2], 3), SplitId(6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rewards_bounded_and_cover_members() {
        let mut model = SyntheticModel::flat(vec![0.2, 0.5, 0.8, 0.6], 20.0);
        model.metric_offset = 0.05;
        model.metric_mixing = 0.5;
        let env = SyntheticEnv::new(model, 3).unwrap();
        for split in 0..200 {
            let ev = env.evaluate(ids(&[0, 1, 3], 4), SplitId(split)).unwrap();
            assert_eq!(ev.rewards.len(), 3);
            for (_, pair) in &ev.rewards {
                for &v in pair {
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn empirical_mean_tracks_true_mean() {
        // three-sigma band for the Monte Carlo average of n Beta draws
        let mut model = SyntheticModel::flat(vec![0.7, 0.55], 150.0);
        model.metric_offset = -0.05;
        model.metric_mixing = 0.5;
        let env = SyntheticEnv::new(model.clone(), 17).unwrap();
        let set = ids(&[0, 1], 2);
        let n = 100_000u64;
        let mut sums = [0.0f64; 2];
        for split in 0..n {
            let ev = env.evaluate(set, SplitId(split)).unwrap();
            sums[0] += ev.reward(TaskId(0), MetricKind::Aupr).unwrap();
            sums[1] += ev.reward(TaskId(0), MetricKind::Auroc).unwrap();
        }
        for (i, metric) in MetricKind::ALL.into_iter().enumerate() {
            let mu = model.true_mean(TaskId(0), set, metric).unwrap();
            let tol = 3.0 * (mu * (1.0 - mu) / (model.noise_concentration + 1.0)).sqrt()
                / (n as f64).sqrt();
            assert_abs_diff_eq!(sums[i] / n as f64, mu, epsilon = tol);
        }
    }

    #[test]
    fn equal_means_share_draws_distinct_means_do_not() {
        let mut model = SyntheticModel::flat(vec![0.5, 0.5, 0.5], 150.0);
        model.transfer[1][0] = 0.1;
        let env = SyntheticEnv::new(model, 5).unwrap();
        // task 2 has no incoming effects: singleton vs pair draws coincide
        let single = env.evaluate(ids(&[2], 3), SplitId(7)).unwrap();
        let pair = env.evaluate(ids(&[0, 2], 3), SplitId(7)).unwrap();
        assert_eq!(
            single.reward(TaskId(2), MetricKind::Aupr),
            pair.reward(TaskId(2), MetricKind::Aupr)
        );
        // task 0 gains from task 1, so its draws differ between scenarios
        let s0 = env.evaluate(ids(&[0], 3), SplitId(7)).unwrap();
        let p01 = env.evaluate(ids(&[0, 1], 3), SplitId(7)).unwrap();
        assert_ne!(
            s0.reward(TaskId(0), MetricKind::Aupr),
            p01.reward(TaskId(0), MetricKind::Aupr)
        );
    }

    #[test]
    fn model_validation_catches_bad_shapes() {
        let mut model = SyntheticModel::flat(vec![0.5, 0.5], 150.0);
        model.transfer = vec![vec![0.0; 3]; 2];
        assert!(model.validate().is_err());
        let mut model = SyntheticModel::flat(vec![0.5, 0.5], 150.0);
        model.noise_concentration = 0.0;
        assert!(model.validate().is_err());
        let mut model = SyntheticModel::flat(vec![0.5, 0.5], 150.0);
        model.metric_mixing = 1.5;
        assert!(model.validate().is_err());
    }
}
