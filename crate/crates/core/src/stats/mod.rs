//! Statistical machinery for the transfer-estimation stage: streaming
//! moments, two-sample t-tests, the Friedman chi-square test, and the
//! Nemenyi post-hoc test.
//!
//! Distribution tails go through the regularized incomplete beta and gamma
//! functions; the test suite checks those against brute-force quadrature.

mod nemenyi_table;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_lr, gamma_ur};
use thiserror::Error;

pub use nemenyi_table::{MAX_TREATMENTS, MIN_TREATMENTS, SUPPORTED_ALPHAS};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("non-finite sample value {0}")]
    NonFiniteSample(f64),
    #[error("need at least {need} samples per group, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("block matrix needs >= 2 blocks and >= 2 treatments, got {blocks} x {treatments}")]
    DegenerateBlocks { blocks: usize, treatments: usize },
    #[error("ragged block matrix: block {block} has {got} entries, expected {expected}")]
    RaggedBlocks {
        block: usize,
        got: usize,
        expected: usize,
    },
    #[error("alpha {0} not tabulated for the Nemenyi test; supported: 0.01, 0.05, 0.10")]
    UnsupportedAlpha(f64),
    #[error("Nemenyi critical values tabulated for 2..=50 treatments, got {0}")]
    UnsupportedTreatmentCount(usize),
}

/// Streaming sample moments (Welford's recurrence).
///
/// `m2` is the running sum of squared deviations; the unbiased variance is
/// `m2 / (count - 1)` and exists only once two samples have been seen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl SampleStats {
    pub fn new() -> SampleStats {
        SampleStats::default()
    }

    pub fn push(&mut self, x: f64) -> Result<(), StatsError> {
        if !x.is_finite() {
            return Err(StatsError::NonFiniteSample(x));
        }
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        Ok(())
    }

    /// Functional flavor of [`SampleStats::push`].
    pub fn updated(mut self, x: f64) -> Result<SampleStats, StatsError> {
        self.push(x)?;
        Ok(self)
    }

    pub fn from_samples(xs: &[f64]) -> Result<SampleStats, StatsError> {
        let mut s = SampleStats::new();
        for &x in xs {
            s.push(x)?;
        }
        Ok(s)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased sample variance, `None` before the second sample.
    pub fn variance(&self) -> Option<f64> {
        if self.count >= 2 {
            Some(self.m2 / (self.count - 1) as f64)
        } else {
            None
        }
    }

    pub fn std_dev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }
}

/// Outcome of a hypothesis test at a fixed significance level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

impl TestResult {
    fn at_level(statistic: f64, p_value: f64, alpha: f64) -> TestResult {
        TestResult {
            statistic,
            p_value,
            significant: p_value < alpha,
        }
    }
}

/// Variants of the one-sided two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    /// Pooled-variance Student test, df = n_a + n_b - 2.
    Pooled,
    /// Welch's unequal-variance test with Welch-Satterthwaite df.
    Welch,
    /// Paired test on per-index differences (requires equal lengths).
    Paired,
}

/// One-sided two-sample t-test of H0: mean(a) <= mean(b).
///
/// Rejects (small p) when `a` significantly exceeds `b`. With zero variance
/// the p-value degenerates to 0 or 1 by the sign of the mean difference.
pub fn t_test_one_sided(
    a: &[f64],
    b: &[f64],
    alpha: f64,
    kind: TTestKind,
) -> Result<TestResult, StatsError> {
    if a.len() < 2 {
        return Err(StatsError::TooFewSamples {
            need: 2,
            got: a.len(),
        });
    }
    if b.len() < 2 {
        return Err(StatsError::TooFewSamples {
            need: 2,
            got: b.len(),
        });
    }
    if kind == TTestKind::Paired && a.len() != b.len() {
        return Err(StatsError::RaggedBlocks {
            block: 0,
            got: b.len(),
            expected: a.len(),
        });
    }

    let sa = SampleStats::from_samples(a)?;
    let sb = SampleStats::from_samples(b)?;
    let (diff, se, df) = match kind {
        TTestKind::Pooled => {
            let na = sa.count() as f64;
            let nb = sb.count() as f64;
            let df = na + nb - 2.0;
            let pooled = (sa.m2() + sb.m2()) / df;
            (
                sa.mean() - sb.mean(),
                (pooled * (1.0 / na + 1.0 / nb)).sqrt(),
                df,
            )
        }
        TTestKind::Welch => {
            let na = sa.count() as f64;
            let nb = sb.count() as f64;
            let va = sa.variance().unwrap() / na;
            let vb = sb.variance().unwrap() / nb;
            let se2 = va + vb;
            let df = if se2 > 0.0 {
                se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0))
            } else {
                na + nb - 2.0
            };
            (sa.mean() - sb.mean(), se2.sqrt(), df)
        }
        TTestKind::Paired => {
            let mut sd = SampleStats::new();
            for (&x, &y) in a.iter().zip(b) {
                sd.push(x - y)?;
            }
            let n = sd.count() as f64;
            (
                sd.mean(),
                (sd.variance().unwrap() / n).sqrt(),
                n - 1.0,
            )
        }
    };

    let (statistic, p_value) = if se == 0.0 {
        if diff > 0.0 {
            (f64::INFINITY, 0.0)
        } else if diff < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let t = diff / se;
        (t, student_t_sf(t, df))
    };
    Ok(TestResult::at_level(statistic, p_value, alpha))
}

/// Upper tail P(T >= t) of the Student t distribution, via the regularized
/// incomplete beta function.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = df / (df + t * t);
    let half_tail = 0.5 * beta_reg(0.5 * df, 0.5, x);
    if t >= 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

/// Upper tail P(X >= x) of the chi-square distribution with `df` degrees of
/// freedom, via the regularized upper incomplete gamma function.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(0.5 * df, 0.5 * x)
}

/// Regularized lower incomplete gamma P(s, x); exposed for oracle checks.
pub fn reg_gamma_lower(s: f64, x: f64) -> f64 {
    gamma_lr(s, x)
}

/// Regularized incomplete beta I_x(a, b); exposed for oracle checks.
pub fn reg_beta(a: f64, b: f64, x: f64) -> f64 {
    beta_reg(a, b, x)
}

/// Within-row ranks, 1-based, smallest value first, ties averaged.
pub fn average_ranks(row: &[f64]) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| row[i].partial_cmp(&row[j]).unwrap().then(i.cmp(&j)));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        // positions i..=j hold equal values; average their 1-based ranks
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn validate_blocks(blocks: &[Vec<f64>]) -> Result<(usize, usize), StatsError> {
    let n = blocks.len();
    let k = blocks.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(StatsError::DegenerateBlocks {
            blocks: n,
            treatments: k,
        });
    }
    for (i, row) in blocks.iter().enumerate() {
        if row.len() != k {
            return Err(StatsError::RaggedBlocks {
                block: i,
                got: row.len(),
                expected: k,
            });
        }
        if let Some(&bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(StatsError::NonFiniteSample(bad));
        }
    }
    Ok((n, k))
}

/// Friedman chi-square test over a blocks x treatments matrix.
///
/// Rows are blocks (data splits), columns treatments. Ties get average
/// ranks; the classical tie correction divisor is applied only when
/// `tie_correction` is set.
pub fn friedman_test(
    blocks: &[Vec<f64>],
    alpha: f64,
    tie_correction: bool,
) -> Result<TestResult, StatsError> {
    let (n, k) = validate_blocks(blocks)?;
    let nf = n as f64;
    let kf = k as f64;

    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in blocks {
        let ranks = average_ranks(row);
        for (s, r) in rank_sums.iter_mut().zip(&ranks) {
            *s += r;
        }
        if tie_correction {
            let mut sorted: Vec<f64> = row.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut i = 0;
            while i < k {
                let mut j = i;
                while j + 1 < k && sorted[j + 1] == sorted[i] {
                    j += 1;
                }
                let t = (j - i + 1) as f64;
                tie_term += t * t * t - t;
                i = j + 1;
            }
        }
    }

    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let mut statistic = 12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0);
    if tie_correction {
        let denom = 1.0 - tie_term / (nf * kf * (kf * kf - 1.0));
        if denom > 0.0 {
            statistic /= denom;
        }
    }
    // rank arithmetic can leave the statistic a hair under zero
    if statistic < 0.0 && statistic > -1e-9 {
        statistic = 0.0;
    }
    let p_value = chi_square_sf(statistic, kf - 1.0);
    Ok(TestResult::at_level(statistic, p_value, alpha))
}

/// Nemenyi post-hoc comparison over the same block matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NemenyiResult {
    /// Mean rank per treatment (rank 1 = smallest value).
    pub avg_ranks: Vec<f64>,
    /// Critical difference q_alpha * sqrt(k(k+1) / (6 n)).
    pub critical_difference: f64,
    /// Symmetric matrix: pair differs significantly.
    pub significant: Vec<Vec<bool>>,
}

/// Critical value q_alpha for k treatments.
pub fn nemenyi_q(alpha: f64, k: usize) -> Result<f64, StatsError> {
    let table = if (alpha - 0.01).abs() < 1e-9 {
        &nemenyi_table::Q_ALPHA_001
    } else if (alpha - 0.05).abs() < 1e-9 {
        &nemenyi_table::Q_ALPHA_005
    } else if (alpha - 0.10).abs() < 1e-9 {
        &nemenyi_table::Q_ALPHA_010
    } else {
        return Err(StatsError::UnsupportedAlpha(alpha));
    };
    if !(MIN_TREATMENTS..=MAX_TREATMENTS).contains(&k) {
        return Err(StatsError::UnsupportedTreatmentCount(k));
    }
    Ok(table[k - MIN_TREATMENTS])
}

/// Critical difference of average ranks for k treatments over n blocks.
pub fn nemenyi_critical_difference(alpha: f64, k: usize, n: usize) -> Result<f64, StatsError> {
    let q = nemenyi_q(alpha, k)?;
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

/// Pairwise Nemenyi test: a pair differs when its average-rank distance
/// exceeds the critical difference.
pub fn nemenyi_posthoc(blocks: &[Vec<f64>], alpha: f64) -> Result<NemenyiResult, StatsError> {
    let (n, k) = validate_blocks(blocks)?;
    let cd = nemenyi_critical_difference(alpha, k, n)?;

    let mut avg_ranks = vec![0.0; k];
    for row in blocks {
        for (s, r) in avg_ranks.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
    }
    for r in &mut avg_ranks {
        *r /= n as f64;
    }

    let significant: Vec<Vec<bool>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| i != j && (avg_ranks[i] - avg_ranks[j]).abs() > cd)
                .collect()
        })
        .collect();
    Ok(NemenyiResult {
        avg_ranks,
        critical_difference: cd,
        significant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn welford_constant_stream() {
        let s = SampleStats::from_samples(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(s.mean(), 0.5);
        assert_eq!(s.variance().unwrap(), 0.0);
    }

    #[test]
    fn welford_two_points() {
        let s = SampleStats::from_samples(&[0.0, 1.0]).unwrap();
        assert_eq!(s.mean(), 0.5);
        assert_eq!(s.variance().unwrap(), 0.5);
    }

    #[test]
    fn welford_rejects_non_finite() {
        let mut s = SampleStats::new();
        assert!(s.push(f64::NAN).is_err());
        assert!(s.push(f64::INFINITY).is_err());
    }

    #[test]
    fn welford_matches_two_pass_on_long_stream() {
        // fixed synthetic stream; compare against the naive two-pass answer
        let mut r = crate::rng::RngStream::new(2024, 1);
        let xs: Vec<f64> = (0..1_000_000).map(|_| 0.3 + 0.4 * r.next_f64()).collect();
        let s = SampleStats::from_samples(&xs).unwrap();
        let mean: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 =
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        assert_abs_diff_eq!(s.mean(), mean, epsilon = 1e-12 * mean.abs());
        assert_abs_diff_eq!(s.variance().unwrap(), var, epsilon = 1e-12 * var.abs());
    }

    #[test]
    fn t_test_identical_lists() {
        let a = [0.5, 0.6, 0.7, 0.8];
        let r = t_test_one_sided(&a, &a, 0.05, TTestKind::Pooled).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value >= 0.5);
        assert!(!r.significant);
    }

    #[test]
    fn t_test_separated_means() {
        let mut r = crate::rng::RngStream::new(7, 0);
        let a: Vec<f64> = (0..500).map(|_| 0.7 + 0.01 * (r.next_f64() - 0.5)).collect();
        let b: Vec<f64> = (0..500).map(|_| 0.5 + 0.01 * (r.next_f64() - 0.5)).collect();
        let res = t_test_one_sided(&a, &b, 0.05, TTestKind::Pooled).unwrap();
        assert!(res.significant);
        // reversed direction is never significant
        let rev = t_test_one_sided(&b, &a, 0.05, TTestKind::Pooled).unwrap();
        assert!(!rev.significant);
    }

    // Reference values from an independent implementation (SciPy 1.x,
    // ttest_ind / ttest_rel with alternative="greater").
    #[test]
    fn t_test_frozen_fixture() {
        let a = [0.71, 0.69, 0.74, 0.68, 0.72, 0.70, 0.73, 0.69, 0.71, 0.72];
        let b = [0.68, 0.67, 0.70, 0.66, 0.69, 0.68, 0.71, 0.67, 0.66, 0.69];
        let pooled = t_test_one_sided(&a, &b, 0.05, TTestKind::Pooled).unwrap();
        assert_abs_diff_eq!(pooled.statistic, 3.4939393893923443, epsilon = 1e-10);
        assert_abs_diff_eq!(pooled.p_value, 0.001295681430180234, epsilon = 1e-10);
        let welch = t_test_one_sided(&a, &b, 0.05, TTestKind::Welch).unwrap();
        assert_abs_diff_eq!(welch.p_value, 0.001326048969089098, epsilon = 1e-10);
        let paired = t_test_one_sided(&a, &b, 0.05, TTestKind::Paired).unwrap();
        assert_abs_diff_eq!(paired.statistic, 8.573214099741106, epsilon = 1e-9);
        assert_abs_diff_eq!(paired.p_value, 6.340924360067694e-06, epsilon = 1e-12);
    }

    #[test]
    fn t_sf_frozen_points() {
        // mpmath betainc at 40 digits
        assert_abs_diff_eq!(student_t_sf(2.5, 18.0), 0.01115401011601111189, epsilon = 1e-12);
        assert_abs_diff_eq!(student_t_sf(-1.25, 7.0), 0.87426605171711985737, epsilon = 1e-12);
    }

    #[test]
    fn t_test_zero_variance_cases() {
        let a = [0.7, 0.7, 0.7];
        let b = [0.5, 0.5, 0.5];
        let up = t_test_one_sided(&a, &b, 0.05, TTestKind::Pooled).unwrap();
        assert_eq!(up.p_value, 0.0);
        assert!(up.significant);
        let down = t_test_one_sided(&b, &a, 0.05, TTestKind::Pooled).unwrap();
        assert_eq!(down.p_value, 1.0);
        let flat = t_test_one_sided(&a, &a, 0.05, TTestKind::Pooled).unwrap();
        assert_eq!(flat.p_value, 1.0);
    }

    #[test]
    fn t_test_too_few_samples() {
        assert!(t_test_one_sided(&[1.0], &[1.0, 2.0], 0.05, TTestKind::Pooled).is_err());
    }

    #[test]
    fn p_value_monotone_in_mean_difference() {
        let b = [0.50, 0.52, 0.48, 0.51, 0.49, 0.50];
        let mut last = 1.0;
        for step in 1..=20 {
            let shift = step as f64 * 0.005;
            let a: Vec<f64> = b.iter().map(|x| x + shift).collect();
            let p = t_test_one_sided(&a, &b, 0.05, TTestKind::Pooled)
                .unwrap()
                .p_value;
            assert!(p < last, "p not decreasing at shift {shift}");
            last = p;
        }
    }

    #[test]
    fn friedman_identical_treatments() {
        let blocks: Vec<Vec<f64>> = (0..10).map(|_| vec![0.4, 0.4, 0.4]).collect();
        let r = friedman_test(&blocks, 0.05, false).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.significant);
    }

    #[test]
    fn friedman_perfect_ordering_hits_maximum() {
        // ranks always (1,2,3) over 10 blocks -> statistic 20
        let blocks: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![0.1 + i as f64, 0.2 + i as f64, 0.3 + i as f64])
            .collect();
        let r = friedman_test(&blocks, 0.05, false).unwrap();
        assert_abs_diff_eq!(r.statistic, 20.0, epsilon = 1e-12);
        assert!(r.significant);
    }

    // Frozen against SciPy: friedmanchisquare equals the plain statistic on
    // tie-free data; the tied 6x4 fixture value is the hand rank-sum formula.
    #[test]
    fn friedman_frozen_fixtures() {
        let tie_free = vec![
            vec![1.0, 2.0, 3.0],
            vec![1.5, 2.5, 3.5],
            vec![2.0, 1.0, 3.0],
            vec![1.0, 3.0, 2.0],
            vec![2.2, 2.1, 2.3],
        ];
        let r = friedman_test(&tie_free, 0.05, false).unwrap();
        assert_abs_diff_eq!(r.statistic, 5.2, epsilon = 1e-10);
        assert_abs_diff_eq!(r.p_value, 0.0742735782143338, epsilon = 1e-10);

        let tied = vec![
            vec![0.52, 0.61, 0.57, 0.49],
            vec![0.55, 0.60, 0.60, 0.50],
            vec![0.48, 0.66, 0.59, 0.48],
            vec![0.51, 0.63, 0.55, 0.52],
            vec![0.53, 0.59, 0.58, 0.47],
            vec![0.50, 0.64, 0.61, 0.51],
        ];
        let r = friedman_test(&tied, 0.05, false).unwrap();
        assert_abs_diff_eq!(r.statistic, 15.7, epsilon = 1e-10);
        assert_abs_diff_eq!(r.p_value, 0.0013064156593720652, epsilon = 1e-12);
        // with tie correction the statistic matches SciPy's corrected value
        let rc = friedman_test(&tied, 0.05, true).unwrap();
        assert_abs_diff_eq!(rc.statistic, 16.24137931034483, epsilon = 1e-10);
    }

    #[test]
    fn friedman_invariant_under_monotone_transform() {
        let blocks = vec![
            vec![0.52, 0.61, 0.57, 0.49],
            vec![0.55, 0.60, 0.60, 0.50],
            vec![0.48, 0.66, 0.59, 0.48],
            vec![0.51, 0.63, 0.55, 0.52],
        ];
        let mapped: Vec<Vec<f64>> = blocks
            .iter()
            .map(|row| row.iter().map(|x: &f64| (5.0 * x).exp()).collect::<Vec<f64>>())
            .collect();
        let r1 = friedman_test(&blocks, 0.05, false).unwrap();
        let r2 = friedman_test(&mapped, 0.05, false).unwrap();
        assert_eq!(r1.statistic, r2.statistic);
    }

    #[test]
    fn chi_square_sf_frozen_points() {
        assert_abs_diff_eq!(chi_square_sf(20.0, 3.0), 0.00016974243555282632, epsilon = 1e-12);
        assert_abs_diff_eq!(chi_square_sf(5.5, 2.0), 0.06392786120670757, epsilon = 1e-12);
        assert_abs_diff_eq!(chi_square_sf(43.2, 43.0), 0.46276399670893387, epsilon = 1e-12);
    }

    #[test]
    fn incomplete_beta_gamma_frozen_points() {
        assert_abs_diff_eq!(reg_beta(2.5, 3.5, 0.3), 0.29675298929566637832, epsilon = 1e-12);
        assert_abs_diff_eq!(reg_beta(9.0, 0.5, 0.95), 0.34328958321110969596, epsilon = 1e-12);
        assert_abs_diff_eq!(reg_beta(0.5, 0.5, 0.5), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(reg_gamma_lower(1.5, 2.0), 0.7385358700508893778, epsilon = 1e-12);
        assert_abs_diff_eq!(reg_gamma_lower(10.0, 9.5), 0.47817397776279258911, epsilon = 1e-12);
        assert_abs_diff_eq!(reg_gamma_lower(0.5, 0.25), 0.52049987781304653768, epsilon = 1e-12);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[0.3, 0.1, 0.3]), vec![2.5, 1.0, 2.5]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[0.2, 0.4, 0.1]), vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn nemenyi_identical_columns_no_pairs() {
        let blocks: Vec<Vec<f64>> = (0..20).map(|_| vec![0.5, 0.5, 0.5]).collect();
        let r = nemenyi_posthoc(&blocks, 0.05).unwrap();
        assert!(r.significant.iter().flatten().all(|&s| !s));
    }

    #[test]
    fn nemenyi_constant_offset_two_columns() {
        let blocks: Vec<Vec<f64>> = (0..500)
            .map(|i| {
                let x = 0.1 + (i as f64) * 1e-4;
                vec![x, x + 1.0]
            })
            .collect();
        let r = nemenyi_posthoc(&blocks, 0.05).unwrap();
        assert!(r.significant[0][1]);
        assert!(r.significant[1][0]);
    }

    #[test]
    fn nemenyi_symmetry() {
        let mut rng = crate::rng::RngStream::new(5, 5);
        let blocks: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..6).map(|_| rng.next_f64()).collect())
            .collect();
        let r = nemenyi_posthoc(&blocks, 0.05).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(r.significant[i][j], r.significant[j][i]);
            }
        }
    }

    #[test]
    fn nemenyi_cd_formula_k44() {
        // 44 scenario columns over 500 splits
        let cd = nemenyi_critical_difference(0.05, 44, 500).unwrap();
        let q = nemenyi_q(0.05, 44).unwrap();
        assert_abs_diff_eq!(cd, q * (44.0 * 45.0 / 3000.0f64).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(cd, 3.194918819904702, epsilon = 1e-10);
    }

    #[test]
    fn nemenyi_unsupported_alpha() {
        assert_eq!(
            nemenyi_q(0.2, 10).unwrap_err(),
            StatsError::UnsupportedAlpha(0.2)
        );
        assert!(nemenyi_q(0.05, 51).is_err());
    }
}
