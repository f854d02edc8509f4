//! Evaluation statistics over trial outcomes: Tukey boxplots of recovered
//! parameter values, non-convergence and bound-hugging flags, accuracy win
//! ratios against a baseline, and one-way ANOVA / one-sample t tests for
//! comparing configuration groups.

use crate::error::{Error, Result};
use crate::space::SearchRange;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

/// Quantile with linear interpolation at rank p * (n - 1) over sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Argument("quantile of empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("quantile level {p} outside [0, 1]")));
    }
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Five-number Tukey summary. Whiskers sit on the most extreme data points
/// within 1.5 IQR of the quartiles, not on the fences themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boxplot {
    pub whisker_lo: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_hi: f64,
}

impl Boxplot {
    pub fn whisker_width(&self) -> f64 {
        self.whisker_hi - self.whisker_lo
    }
}

pub fn tukey_boxplot(values: &[f64]) -> Result<Boxplot> {
    if values.is_empty() {
        return Err(Error::Argument("boxplot of empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("boxplot sample contains non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile(&sorted, 0.25)?;
    let median = quantile(&sorted, 0.5)?;
    let q3 = quantile(&sorted, 0.75)?;
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = sorted
        .iter()
        .cloned()
        .find(|&v| v >= lo_fence)
        .unwrap_or(sorted[0]);
    let whisker_hi = sorted
        .iter()
        .rev()
        .cloned()
        .find(|&v| v <= hi_fence)
        .unwrap_or(*sorted.last().unwrap());
    Ok(Boxplot {
        whisker_lo,
        q1,
        median,
        q3,
        whisker_hi,
    })
}

/// Non-converged: the whisker spread exceeds 10% of the original range.
pub const NC_SPREAD_FRACTION: f64 = 0.10;
/// Bound-hugging: the median sits within 1% of a bound, measured as a
/// fraction of the original range.
pub const HB_MEDIAN_FRACTION: f64 = 0.01;

pub fn nc_flag(box_: &Boxplot, original: SearchRange) -> bool {
    box_.whisker_width() > NC_SPREAD_FRACTION * original.width()
}

pub fn hb_flag(box_: &Boxplot, original: SearchRange) -> bool {
    let tol = HB_MEDIAN_FRACTION * original.width();
    let near_bound =
        (box_.median - original.lo).abs() <= tol || (original.hi - box_.median).abs() <= tol;
    near_bound || box_.whisker_lo <= original.lo || box_.whisker_hi >= original.hi
}

/// Absolute relative error of a recovered median against truth. Falls back
/// to the absolute error when truth is zero.
pub fn absolute_relative_error(median: f64, truth: f64) -> f64 {
    if truth == 0.0 {
        (median - truth).abs()
    } else {
        ((median - truth) / truth).abs()
    }
}

/// One parameter's entry in a RosARE comparison: both sides' errors, with
/// flags saying whether each side converged.
#[derive(Debug, Clone, Copy)]
pub struct ArePair {
    pub framework_error: f64,
    pub framework_converged: bool,
    pub baseline_error: f64,
    pub baseline_converged: bool,
}

/// Ratio of strict framework wins among parameters where both sides
/// converged. Ties count against the framework.
pub fn rosare(pairs: &[ArePair]) -> Option<f64> {
    let eligible: Vec<&ArePair> = pairs
        .iter()
        .filter(|p| p.framework_converged && p.baseline_converged)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let wins = eligible
        .iter()
        .filter(|p| p.framework_error < p.baseline_error)
        .count();
    Some(wins as f64 / eligible.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// One-way fixed-effects ANOVA. Degenerate inputs (no within-group
/// variance and no between-group variance) report F = 0, p = 1.
pub fn anova_one_way(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::Argument("ANOVA needs at least two groups".into()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Argument("ANOVA group is empty".into()));
    }
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let df_between = groups.len() - 1;
    let df_within = n_total - groups.len();
    if df_within == 0 {
        return Err(Error::Argument(
            "ANOVA needs more observations than groups".into(),
        ));
    }
    let grand = groups.iter().flatten().sum::<f64>() / n_total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    if ss_within <= f64::EPSILON * grand.abs().max(1.0) {
        if ss_between <= f64::EPSILON * grand.abs().max(1.0) {
            return Ok(AnovaResult {
                f_statistic: 0.0,
                p_value: 1.0,
                df_between,
                df_within,
            });
        }
        return Ok(AnovaResult {
            f_statistic: f64::INFINITY,
            p_value: 0.0,
            df_between,
            df_within,
        });
    }
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
        .map_err(|e| Error::Domain(format!("F distribution: {e}")))?;
    Ok(AnovaResult {
        f_statistic: f,
        p_value: 1.0 - dist.cdf(f),
        df_between,
        df_within,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Two-sided one-sample t test of the mean against `hypothesized`.
pub fn t_test_one_sample(sample: &[f64], hypothesized: f64) -> Result<TTestResult> {
    if sample.len() < 2 {
        return Err(Error::Argument("t test needs at least two observations".into()));
    }
    let n = sample.len() as f64;
    let m = mean(sample);
    let var = sample.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return if m == hypothesized {
            Ok(TTestResult {
                t_statistic: 0.0,
                p_value: 1.0,
                df: sample.len() - 1,
            })
        } else {
            Ok(TTestResult {
                t_statistic: if m > hypothesized {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                p_value: 0.0,
                df: sample.len() - 1,
            })
        };
    }
    let t = (m - hypothesized) / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Domain(format!("t distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult {
        t_statistic: t,
        p_value: p,
        df: sample.len() - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn quantile_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5).unwrap(), 2.5);
        assert_eq!(quantile(&v, 0.25).unwrap(), 1.75);
        assert_eq!(quantile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&v, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn boxplot_basic() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = tukey_boxplot(&v).unwrap();
        assert_eq!(b.q1, 2.0);
        assert_eq!(b.median, 3.0);
        assert_eq!(b.q3, 4.0);
        assert_eq!(b.whisker_lo, 1.0);
        assert_eq!(b.whisker_hi, 5.0);
    }

    #[test]
    fn boxplot_whiskers_exclude_outliers() {
        // q1 = 2, q3 = 4, fences at -1 and 7: the 100 is an outlier, the
        // upper whisker falls back to 5.
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 100.0];
        let b = tukey_boxplot(&v).unwrap();
        assert_eq!(b.q1, 2.25);
        assert_eq!(b.q3, 4.75);
        assert_eq!(b.whisker_hi, 5.0);
        let v2 = [1.0, 2.0, 3.0, 4.0, 100.0];
        let b2 = tukey_boxplot(&v2).unwrap();
        assert_eq!(b2.q1, 2.0);
        assert_eq!(b2.q3, 4.0);
        assert_eq!(b2.whisker_hi, 4.0);
        assert_eq!(b2.whisker_lo, 1.0);
    }

    #[test]
    fn boxplot_single_value() {
        let b = tukey_boxplot(&[3.5]).unwrap();
        assert_eq!(b.median, 3.5);
        assert_eq!(b.whisker_width(), 0.0);
    }

    #[test]
    fn nc_threshold() {
        let range = SearchRange::new(0.0, 10.0).unwrap();
        let tight = Boxplot {
            whisker_lo: 4.6,
            q1: 4.7,
            median: 4.8,
            q3: 4.9,
            whisker_hi: 5.0,
        };
        assert!(!nc_flag(&tight, range));
        let wide = Boxplot {
            whisker_lo: 2.0,
            q1: 4.0,
            median: 5.0,
            q3: 6.0,
            whisker_hi: 8.0,
        };
        assert!(nc_flag(&wide, range));
        // Exactly 10% of range is not flagged (strict inequality).
        let edge = Boxplot {
            whisker_lo: 4.0,
            q1: 4.2,
            median: 4.5,
            q3: 4.8,
            whisker_hi: 5.0,
        };
        assert!(!nc_flag(&edge, range));
    }

    #[test]
    fn hb_median_near_bound() {
        let range = SearchRange::new(0.0, 10.0).unwrap();
        let hugging = Boxplot {
            whisker_lo: 0.02,
            q1: 0.03,
            median: 0.05,
            q3: 0.2,
            whisker_hi: 0.4,
        };
        assert!(hb_flag(&hugging, range));
        let interior = Boxplot {
            whisker_lo: 4.0,
            q1: 4.5,
            median: 5.0,
            q3: 5.5,
            whisker_hi: 6.0,
        };
        assert!(!hb_flag(&interior, range));
    }

    #[test]
    fn hb_whisker_touching_bound() {
        let range = SearchRange::new(0.0, 10.0).unwrap();
        let touching = Boxplot {
            whisker_lo: 3.0,
            q1: 4.0,
            median: 5.0,
            q3: 6.0,
            whisker_hi: 10.0,
        };
        assert!(hb_flag(&touching, range));
    }

    #[test]
    fn are_zero_truth_falls_back_to_absolute() {
        assert_eq!(absolute_relative_error(0.2, 0.0), 0.2);
        assert!(close(absolute_relative_error(0.55, 0.5), 0.1, 1e-12));
    }

    #[test]
    fn rosare_restriction_and_ties() {
        let pairs = vec![
            ArePair {
                framework_error: 0.1,
                framework_converged: true,
                baseline_error: 0.2,
                baseline_converged: true,
            },
            ArePair {
                framework_error: 0.3,
                framework_converged: true,
                baseline_error: 0.3,
                baseline_converged: true,
            },
            ArePair {
                framework_error: 0.01,
                framework_converged: true,
                baseline_error: 0.5,
                baseline_converged: false,
            },
        ];
        // One win, one tie (counts against), one pair excluded.
        assert_eq!(rosare(&pairs), Some(0.5));
        assert_eq!(rosare(&[]), None);
    }

    #[test]
    fn anova_reference_values() {
        // Frozen against scipy.stats.f_oneway.
        let groups = vec![
            vec![2.1, 3.4, 1.9, 2.8],
            vec![4.0, 3.9, 5.1],
            vec![0.5, 1.2, 0.9, 1.1, 0.7],
        ];
        let r = anova_one_way(&groups).unwrap();
        assert!(close(r.f_statistic, 38.97980695961375, 1e-9), "F = {}", r.f_statistic);
        assert!(close(r.p_value, 3.6911532727037626e-05, 1e-12), "p = {}", r.p_value);
        assert_eq!(r.df_between, 2);
        assert_eq!(r.df_within, 9);
    }

    #[test]
    fn anova_two_group_reference() {
        // Frozen against scipy.stats.f_oneway.
        let groups = vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]];
        let r = anova_one_way(&groups).unwrap();
        assert!(close(r.f_statistic, 19.2, 1e-9), "F = {}", r.f_statistic);
        assert!(close(r.p_value, 0.004659214943993935, 1e-12), "p = {}", r.p_value);
    }

    #[test]
    fn anova_identical_groups_degenerate() {
        let groups = vec![vec![2.0, 2.0, 2.0], vec![2.0, 2.0, 2.0]];
        let r = anova_one_way(&groups).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn t_test_reference_values() {
        // Frozen against scipy.stats.ttest_1samp.
        let sample = [0.52, 0.55, 0.58, 0.54, 0.55];
        let r = t_test_one_sample(&sample, 0.5).unwrap();
        assert!(close(r.t_statistic, 4.950821982042218, 1e-9), "t = {}", r.t_statistic);
        assert!(close(r.p_value, 0.00775665828373952, 1e-12), "p = {}", r.p_value);
        assert_eq!(r.df, 4);
    }

    #[test]
    fn t_test_insignificant_reference() {
        // Frozen against scipy.stats.ttest_1samp.
        let sample = [0.41, 0.44, 0.52, 0.47, 0.55, 0.49];
        let r = t_test_one_sample(&sample, 0.5).unwrap();
        assert!(close(r.t_statistic, -0.9534625892455929, 1e-9));
        assert!(close(r.p_value, 0.38414219638485375, 1e-12));
    }

    #[test]
    fn t_test_zero_variance() {
        let r = t_test_one_sample(&[0.5, 0.5, 0.5], 0.5).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = t_test_one_sample(&[0.6, 0.6], 0.5).unwrap();
        assert_eq!(r.p_value, 0.0);
    }

    proptest! {
        #[test]
        fn anova_scale_and_shift_invariance_of_p(
            a in proptest::collection::vec(-5.0f64..5.0, 3..8),
            b in proptest::collection::vec(-5.0f64..5.0, 3..8),
            scale in 0.5f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let base = anova_one_way(&[a.clone(), b.clone()]).unwrap();
            let ta: Vec<f64> = a.iter().map(|v| v * scale + shift).collect();
            let tb: Vec<f64> = b.iter().map(|v| v * scale + shift).collect();
            let trans = anova_one_way(&[ta, tb]).unwrap();
            if base.f_statistic.is_finite() && trans.f_statistic.is_finite() {
                prop_assert!((base.f_statistic - trans.f_statistic).abs()
                    <= 1e-6 * base.f_statistic.abs().max(1.0));
            }
        }

        #[test]
        fn two_group_anova_f_equals_t_squared(
            a in proptest::collection::vec(-5.0f64..5.0, 3..8),
            delta in -3.0f64..3.0,
        ) {
            // Paired construction: second group is the first shifted, so
            // neither is degenerate unless both are.
            let b: Vec<f64> = a.iter().map(|v| v + delta + (v * 0.5).sin()).collect();
            let r = anova_one_way(&[a.clone(), b.clone()]).unwrap();
            // Two-sample t with pooled variance, squared, equals F.
            let na = a.len() as f64;
            let nb = b.len() as f64;
            let ma = a.iter().sum::<f64>() / na;
            let mb = b.iter().sum::<f64>() / nb;
            let sa = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>();
            let sb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
            let pooled = (sa + sb) / (na + nb - 2.0);
            if pooled > 1e-12 && r.f_statistic.is_finite() {
                let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
                prop_assert!((r.f_statistic - t * t).abs() <= 1e-6 * (t * t).max(1.0));
            }
        }
    }
}
