//! Two-sample baselines: Student t (pooled or paired), Mann-Whitney U and
//! Wilcoxon signed-rank. Rank tests use the normal approximation with
//! tie-corrected variance and no continuity correction. All p-values are
//! two-sided.

use std::fmt;

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::rank::{midrank, tie_group_sizes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestMethod {
    TIndependent,
    TPaired,
    MannWhitney,
    WilcoxonSignedRank,
}

impl TestMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestMethod::TIndependent => "t_ind",
            TestMethod::TPaired => "t_paired",
            TestMethod::MannWhitney => "mann_whitney",
            TestMethod::WilcoxonSignedRank => "wilcoxon_sr",
        }
    }
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
    pub method: TestMethod,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sum of squared deviations from the mean.
fn ss(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum()
}

fn two_sided_normal(z: f64) -> f64 {
    let n = Normal::standard();
    (2.0 * n.sf(z.abs())).min(1.0)
}

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("sample contains non-finite values".into()))
    }
}

/// Pooled-variance Student t (`paired = false`) or one-sample t on the
/// differences `x - y` (`paired = true`).
pub fn t_test(x: &[f64], y: &[f64], paired: bool) -> Result<TestResult> {
    check_finite(x)?;
    check_finite(y)?;
    if paired {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument("paired samples differ in length".into()));
        }
        if x.len() < 2 {
            return Err(Error::InsufficientData("paired t needs >= 2 pairs".into()));
        }
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let n = d.len() as f64;
        let var = ss(&d) / (n - 1.0);
        if var <= 0.0 {
            return Err(Error::DegenerateVariance(
                "paired differences have zero variance".into(),
            ));
        }
        let t = mean(&d) / (var / n).sqrt();
        let p = student_p(t, n - 1.0);
        return Ok(TestResult {
            statistic: t,
            p,
            method: TestMethod::TPaired,
        });
    }
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InsufficientData("independent t needs >= 2 values per sample".into()));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let df = n1 + n2 - 2.0;
    let pooled = (ss(x) + ss(y)) / df;
    let diff = mean(x) - mean(y);
    if pooled <= 0.0 {
        if diff == 0.0 {
            return Ok(TestResult {
                statistic: 0.0,
                p: 1.0,
                method: TestMethod::TIndependent,
            });
        }
        return Err(Error::DegenerateVariance(
            "both samples are constant with different means".into(),
        ));
    }
    let t = diff / (pooled * (1.0 / n1 + 1.0 / n2)).sqrt();
    Ok(TestResult {
        statistic: t,
        p: student_p(t, df),
        method: TestMethod::TIndependent,
    })
}

fn student_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Mann-Whitney U for `x`: `R_x - n_x (n_x + 1) / 2` from joint midranks.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult> {
    check_finite(x)?;
    check_finite(y)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::InsufficientData("Mann-Whitney needs nonempty samples".into()));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midrank(&pooled)?;
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;

    let n = n1 + n2;
    let ties: f64 = tie_group_sizes(&pooled)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = if n > 1.0 {
        n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)))
    } else {
        0.0
    };
    let p = if var > 0.0 {
        two_sided_normal((u - n1 * n2 / 2.0) / var.sqrt())
    } else {
        1.0
    };
    Ok(TestResult {
        statistic: u,
        p,
        method: TestMethod::MannWhitney,
    })
}

/// Wilcoxon signed-rank on `x - y`. Zero differences are dropped; the
/// statistic is the sum of ranks of positive differences.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    check_finite(x)?;
    check_finite(y)?;
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("paired samples differ in length".into()));
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("signed-rank test needs >= 1 pair".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Ok(TestResult {
            statistic: 0.0,
            p: 1.0,
            method: TestMethod::WilcoxonSignedRank,
        });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midrank(&abs)?;
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len() as f64;
    let ties: f64 = tie_group_sizes(&abs)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    let p = if var > 0.0 {
        two_sided_normal((w - n * (n + 1.0) / 4.0) / var.sqrt())
    } else {
        1.0
    };
    Ok(TestResult {
        statistic: w,
        p,
        method: TestMethod::WilcoxonSignedRank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_unpaired_samples() {
        let r = t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], false).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_paired_samples_are_degenerate() {
        assert!(matches!(
            t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], true),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn constant_samples() {
        let r = t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0], false).unwrap();
        assert_eq!((r.statistic, r.p), (0.0, 1.0));
        assert!(matches!(
            t_test(&[2.0, 2.0], &[3.0, 3.0], false),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn pooled_t_known_value() {
        // means 2 and 5, ss 2 and 2, pooled var 1, se sqrt(2/3)
        let r = t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], false).unwrap();
        assert_abs_diff_eq!(r.statistic, -3.0 / (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        // 2 * P(T_4 > 3.674235) = 0.0213116411
        assert_abs_diff_eq!(r.p, 0.0213116411, epsilon = 1e-9);
    }

    #[test]
    fn paired_t_known_value() {
        // d = [1, 2, 3]: mean 2, sd 1, t = 2 * sqrt(3)
        let r = t_test(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0], true).unwrap();
        assert_abs_diff_eq!(r.statistic, 2.0 * 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.method, TestMethod::TPaired);
    }

    #[test]
    fn t_input_checks() {
        assert!(t_test(&[1.0], &[1.0, 2.0], false).is_err());
        assert!(t_test(&[1.0, 2.0], &[1.0], true).is_err());
    }

    #[test]
    fn complete_separation() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        let r = mann_whitney_u(&[3.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.statistic, 4.0);
    }

    #[test]
    fn same_multiset() {
        let r = mann_whitney_u(&[1.0, 5.0, 3.0], &[3.0, 1.0, 5.0]).unwrap();
        assert_eq!(r.statistic, 4.5);
        assert_abs_diff_eq!(r.p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn all_tied_mann_whitney() {
        let r = mann_whitney_u(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn signed_rank_basics() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.statistic, r.p), (0.0, 1.0));
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
    }
}
