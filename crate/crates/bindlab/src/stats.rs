//! Cluster-corrected statistics: item-level aggregation, one-sample and
//! paired t-tests with a self-contained t CDF, percent changes, and the
//! empirical p-value convention used by the random-head baseline.
//!
//! Per-pair effects that share an item are not independent, so tests run on
//! item-level means. The t tail is computed from the regularized incomplete
//! beta function (continued fraction, 200-term cap, 1e-12 tolerance) so the
//! crate needs no external distribution tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-item means of a per-pair quantity, in ascending item-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMeans {
    pub items: Vec<u32>,
    pub means: Vec<f64>,
}

impl ItemMeans {
    pub fn n_items(&self) -> usize {
        self.items.len()
    }
}

/// Outcome of a t-test.
///
/// `p_one_sided` is the left tail P(T <= t): the probability of a statistic
/// at least as negative as the observed one. The right tail is
/// `1 - p_one_sided`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_two_sided: f64,
    pub p_one_sided: f64,
}

/// Aggregate per-pair values into per-item arithmetic means.
pub fn item_level_means(per_pair_values: &[f64], item_of_pair: &[u32]) -> ItemMeans {
    assert_eq!(
        per_pair_values.len(),
        item_of_pair.len(),
        "every pair needs an item id"
    );
    let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for (&v, &item) in per_pair_values.iter().zip(item_of_pair) {
        let e = acc.entry(item).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let mut items = Vec::with_capacity(acc.len());
    let mut means = Vec::with_capacity(acc.len());
    for (item, (sum, n)) in acc {
        items.push(item);
        means.push(sum / n as f64);
    }
    ItemMeans { items, means }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n-1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// One-sample t-test of the mean against zero.
pub fn one_sample_t(values: &[f64]) -> Result<TestResult> {
    if values.len() < 2 {
        return Err(Error::DegenerateTest(format!(
            "need at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let m = mean(values);
    let sd = sample_sd(values);
    if sd == 0.0 {
        return Err(Error::DegenerateTest(
            "zero sample variance".to_string(),
        ));
    }
    let t = m / (sd / n.sqrt());
    let df = values.len() - 1;
    Ok(TestResult {
        statistic: t,
        degrees_of_freedom: df,
        p_two_sided: t_two_sided_p(t, df),
        p_one_sided: t_cdf(t, df),
    })
}

/// Paired t-test: one-sample test on the elementwise differences x - y.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::DegenerateTest(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    one_sample_t(&diffs)
}

/// Relative change in percent: 100 * (after - before) / before.
pub fn percent_change(before: f64, after: f64) -> Result<f64> {
    if before == 0.0 {
        return Err(Error::DegenerateTest(
            "percent change undefined for zero baseline".to_string(),
        ));
    }
    Ok(100.0 * (after - before) / before)
}

/// One-sided empirical p-value: the fraction of null trials at least as
/// negative as the observed value, with a `< 1/n` floor when no trial
/// reaches it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalP {
    pub le_count: usize,
    pub trials: usize,
}

impl EmpiricalP {
    /// Count trials with value <= observed.
    pub fn from_null(observed: f64, null: &[f64]) -> Self {
        let le_count = null.iter().filter(|&&v| v <= observed).count();
        EmpiricalP {
            le_count,
            trials: null.len(),
        }
    }

    /// Raw fraction k/n; 0.0 when the count is zero (report as `< 1/n`).
    pub fn value(&self) -> f64 {
        self.le_count as f64 / self.trials as f64
    }

    /// True when no null trial reached the observed value.
    pub fn is_floor(&self) -> bool {
        self.le_count == 0
    }

    /// Upper bound actually claimed: k/n, or 1/n when the count is zero.
    pub fn bound(&self) -> f64 {
        if self.is_floor() {
            1.0 / self.trials as f64
        } else {
            self.value()
        }
    }
}

impl std::fmt::Display for EmpiricalP {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_floor() {
            write!(f, "p < 1/{}", self.trials)
        } else {
            write!(f, "p = {}/{}", self.le_count, self.trials)
        }
    }
}

// ---------------------------------------------------------------------------
// t distribution tail via the regularized incomplete beta function
// ---------------------------------------------------------------------------

/// P(T <= t) for Student's t with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: usize) -> f64 {
    let v = df as f64;
    let x = v / (v + t * t);
    let tail = 0.5 * reg_inc_beta(0.5 * v, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value for an observed t statistic.
pub fn t_two_sided_p(t: f64, df: usize) -> f64 {
    let v = df as f64;
    reg_inc_beta(0.5 * v, 0.5, v / (v + t * t))
}

const INC_BETA_MAX_TERMS: usize = 200;
const INC_BETA_TOL: f64 = 1e-12;

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    assert!((0.0..=1.0).contains(&x), "x must lie in [0, 1]");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let front =
        (a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)).exp();
    // The continued fraction converges fast only below the symmetry point.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - reg_inc_beta(b, a, 1.0 - x)
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=INC_BETA_MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < INC_BETA_TOL {
            break;
        }
    }
    h
}

/// ln Gamma via the Lanczos approximation (g = 7, 9 coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn item_means_basic() {
        let means = item_level_means(&[2.0, 4.0, 1.0], &[1, 1, 2]);
        assert_eq!(means.items, vec![1, 2]);
        assert_eq!(means.means, vec![3.0, 1.0]);
    }

    #[test]
    fn item_means_single_pair_per_item() {
        let means = item_level_means(&[0.5, -1.5], &[10, 3]);
        assert_eq!(means.items, vec![3, 10]);
        assert_eq!(means.means, vec![-1.5, 0.5]);
    }

    #[test]
    fn item_means_identical_values_exact() {
        let means = item_level_means(&[0.7; 5], &[4, 4, 4, 4, 4]);
        assert_eq!(means.means, vec![0.7]);
    }

    #[test]
    fn one_sample_t_textbook() {
        let r = one_sample_t(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.statistic - 3.464_101_615_137_754_4).abs() < 1e-12);
        assert_eq!(r.degrees_of_freedom, 2);
        // exact closed form for df=2: p = 1 - sqrt(6/7)
        assert!((r.p_two_sided - 0.074_179_900_227_448_58).abs() < 1e-10);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        assert!(matches!(
            one_sample_t(&[0.5, 0.5, 0.5]),
            Err(Error::DegenerateTest(_))
        ));
    }

    #[test]
    fn paired_t_reduces_to_one_sample() {
        let x = [2.0, 4.0, 6.0];
        let y = [1.0, 2.0, 3.0];
        let r = paired_t(&x, &y).unwrap();
        let d = one_sample_t(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r, d);
    }

    #[test]
    fn paired_t_equal_samples_degenerate() {
        let x = [1.0, 2.0];
        assert!(matches!(paired_t(&x, &x), Err(Error::DegenerateTest(_))));
    }

    #[test]
    fn sign_flip_negates_t() {
        let vals = [0.3, -0.1, 0.8, 0.2];
        let flipped: Vec<f64> = vals.iter().map(|v| -v).collect();
        let a = one_sample_t(&vals).unwrap();
        let b = one_sample_t(&flipped).unwrap();
        assert!((a.statistic + b.statistic).abs() < 1e-12);
        assert!((a.p_two_sided - b.p_two_sided).abs() < 1e-12);
    }

    #[test]
    fn one_sided_tails_sum_to_one() {
        for &t in &[-4.2, -1.0, 0.0, 0.3, 2.7, 9.9] {
            for &df in &[2usize, 5, 65] {
                let s = t_cdf(t, df) + t_cdf(-t, df);
                assert!((s - 1.0).abs() < 1e-12, "t={t} df={df} sum={s}");
            }
        }
    }

    #[test]
    fn percent_change_paper_arithmetic() {
        // table-rounded inputs reproduce the published values to table rounding
        let pc = percent_change(3.45, 2.64).unwrap();
        assert!((pc - (-23.478_260_869_565_215)).abs() < 1e-9);
        assert_eq!((pc * 10.0).round() / 10.0, -23.5);

        // from four-decimal inputs the change is -17.35%; the published -17.4
        // was rounded from unrounded strengths, so allow that propagation
        let pc = percent_change(0.1026, 0.0848).unwrap();
        assert!((pc - (-17.348_927_875_243_665)).abs() < 1e-9);
        assert!((pc - (-17.4)).abs() < 0.1);
    }

    #[test]
    fn percent_change_identities() {
        assert_eq!(percent_change(4.2, 4.2).unwrap(), 0.0);
        for &b in &[-3.0, 0.25, 17.0] {
            let r = 12.5;
            let pc = percent_change(b, b * (1.0 + r / 100.0)).unwrap();
            assert!((pc - r).abs() < 1e-9);
        }
        assert!(percent_change(0.0, 1.0).is_err());
    }

    #[test]
    fn empirical_p_counting_convention() {
        // no trial as negative as observed -> floor report
        let p = EmpiricalP::from_null(-2.0, &[-1.0, 0.0, 1.0]);
        assert!(p.is_floor());
        assert_eq!(p.to_string(), "p < 1/3");
        assert_eq!(p.bound(), 1.0 / 3.0);

        // one of two trials at least as negative -> 1/2
        let p = EmpiricalP::from_null(-2.0, &[-3.0, 0.0]);
        assert_eq!(p.le_count, 1);
        assert_eq!(p.value(), 0.5);
        assert_eq!(p.to_string(), "p = 1/2");

        // ties count: a trial exactly at the observed value
        let p = EmpiricalP::from_null(-1.0, &[-1.0, 0.0]);
        assert_eq!(p.le_count, 1);
    }
}
