//! Goodness-of-fit machinery shared by every statistical check: one- and
//! two-sample Kolmogorov-Smirnov, Pearson chi-square against a discrete pmf,
//! and correlation with a 4-sigma normal bound.
//!
//! p-values are asymptotic throughout.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Width of the normal bound used for moment and correlation checks.
pub const SIGMA_BOUND: f64 = 4.0;

/// Minimum expected count per chi-square bin after merging.
pub const MIN_EXPECTED: f64 = 5.0;

/// Smallest sample size for which the Kolmogorov asymptotics are trusted.
pub const KS_MIN_N: usize = 35;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SampleSize {
    One(usize),
    Two(usize, usize),
}

impl From<usize> for SampleSize {
    fn from(n: usize) -> Self {
        SampleSize::One(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n: SampleSize,
    pub pass: bool,
    pub significance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestReport {
    /// `pass` is always `p_value > significance`.
    pub fn new(
        name: impl Into<String>,
        statistic: f64,
        p_value: f64,
        n: impl Into<SampleSize>,
        significance: f64,
    ) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport {
            name: name.into(),
            statistic,
            p_value,
            n: n.into(),
            pass: p_value > significance,
            significance,
            note: None,
        }
    }

    /// A deterministic check: p = 1 when it holds, 0 otherwise, at significance 0.
    pub fn exact(name: impl Into<String>, statistic: f64, holds: bool, n: impl Into<SampleSize>) -> Self {
        Self::new(name, statistic, if holds { 1.0 } else { 0.0 }, n, 0.0)
    }

    /// A z-score checked against the 4-sigma bound. The p-value is two-sided
    /// normal and the significance is the matching two-sided tail mass, so
    /// `pass` is `|z| < 4`.
    pub fn z_bound(name: impl Into<String>, z: f64, n: impl Into<SampleSize>) -> Self {
        Self::new(name, z, normal_two_sided(z), n, normal_two_sided(SIGMA_BOUND))
    }

    /// Wraps a test whose null is expected to be rejected (a power check).
    pub fn expecting_rejection(inner: TestReport) -> Self {
        let rejected = !inner.pass;
        let mut r = Self::exact(
            format!("{} rejects", inner.name),
            inner.statistic,
            rejected,
            inner.n,
        );
        r.note = Some(format!(
            "null p-value {:.3e} at significance {:.0e}",
            inner.p_value, inner.significance
        ));
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {:<58} stat={:<12.6} p={:<10.4e} alpha={:.1e}{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.statistic,
            self.p_value,
            self.significance,
            self.note
                .as_ref()
                .map(|n| format!("  ({n})"))
                .unwrap_or_default()
        )
    }
}

/// Two-sided standard normal tail `P(|Z| > |z|)`.
pub fn normal_two_sided(z: f64) -> f64 {
    if z.is_nan() {
        return 0.0;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        // theta-function form converges fast for small lambda
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            let term = (-(j * j) * pi2 / (8.0 * lambda * lambda)).exp();
            cdf += term;
            if term < 1e-17 * cdf {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            sign = -sign;
            if term < 1e-17 {
                break;
            }
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup |F_n - F|`, evaluated at both sides of every jump.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let xs = sorted(sample);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(
    name: impl Into<String>,
    sample: &[f64],
    cdf: F,
    significance: f64,
) -> Result<TestReport> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("ks_one_sample"));
    }
    let d = ks_statistic(sample, cdf);
    let n = sample.len();
    let mut r = TestReport::new(name, d, ks_p_value(d, n as f64), n, significance);
    if n < KS_MIN_N {
        r.note = Some(format!("n = {n} below asymptotic validity range"));
    }
    Ok(r)
}

pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_two_sample(
    name: impl Into<String>,
    a: &[f64],
    b: &[f64],
    significance: f64,
) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("ks_two_sample"));
    }
    let d = ks_two_sample_statistic(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n_eff = na * nb / (na + nb);
    Ok(TestReport::new(
        name,
        d,
        ks_p_value(d, n_eff),
        SampleSize::Two(a.len(), b.len()),
        significance,
    ))
}

/// Bins `(expected, observed)` after merging adjacent bins from the left
/// until each carries at least [`MIN_EXPECTED`]; a short remainder joins the
/// last bin.
pub fn merge_bins(expected: &[f64], observed: &[f64]) -> Vec<(f64, f64)> {
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    for (&ei, &oi) in expected.iter().zip(observed) {
        e += ei;
        o += oi;
        if e >= MIN_EXPECTED {
            bins.push((e, o));
            e = 0.0;
            o = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += e;
                last.1 += o;
            }
            None => bins.push((e, o)),
        }
    }
    bins
}

/// Pearson chi-square of a frequency table `counts[k]` against `pmf(k)`.
///
/// Mass of the pmf beyond the table is collected in a tail bin with observed
/// count 0. Degrees of freedom are `bins - 1`; nothing is estimated from data.
pub fn chi_square_pmf<F: Fn(usize) -> f64>(
    name: impl Into<String>,
    counts: &[u64],
    pmf: F,
    significance: f64,
) -> Result<TestReport> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput("chi_square_pmf"));
    }
    let t = total as f64;
    let mut expected: Vec<f64> = (0..counts.len()).map(|k| pmf(k) * t).collect();
    let mut observed: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let tail = (1.0 - expected.iter().sum::<f64>() / t).max(0.0) * t;
    expected.push(tail);
    observed.push(0.0);

    let bins = merge_bins(&expected, &observed);
    if bins.len() < 2 {
        return Err(Error::DegenerateTest(
            "all expected mass falls in one bin after merging".into(),
        ));
    }
    let stat: f64 = bins
        .iter()
        .map(|&(e, o)| if e > 0.0 { (o - e) * (o - e) / e } else { 0.0 })
        .sum();
    let df = (bins.len() - 1) as f64;
    let p = ChiSquared::new(df)
        .map_err(|e| Error::DegenerateTest(e.to_string()))?
        .sf(stat);
    Ok(TestReport::new(name, stat, p, total as usize, significance)
        .with_note(format!("{} bins", bins.len())))
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::contract("correlation needs equal lengths"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation; passes iff `|r| < 4/sqrt(n)`.
pub fn correlation_ci(name: impl Into<String>, a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.len() != b.len() || a.len() < 30 {
        return Err(Error::contract(
            "correlation needs equal lengths of at least 30",
        ));
    }
    let r = pearson(a, b)?;
    let n = a.len();
    let z = r * (n as f64).sqrt();
    let mut rep = TestReport::z_bound(name, z, n);
    rep.statistic = r;
    Ok(rep)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// z-score of the sample mean against `target` using the sample standard error.
/// A constant sample equal to the target scores 0.
pub fn mean_z(xs: &[f64], target: f64) -> f64 {
    let se = (variance(xs) / xs.len() as f64).sqrt();
    let diff = mean(xs) - target;
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

/// z-score of the sample variance against `target`, with the standard error
/// estimated from the fourth central moment.
pub fn variance_z(xs: &[f64], target: f64) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let v = variance(xs);
    let se = ((m4 - v * v) / n).sqrt();
    if se == 0.0 {
        return if v == target { 0.0 } else { f64::INFINITY };
    }
    (v - target) / se
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{open01, stream, Purpose};

    #[test]
    fn single_point_statistic() {
        assert_eq!(ks_statistic(&[0.5], |x| x), 0.5);
    }

    #[test]
    fn quantile_grid_statistic() {
        let n = 40;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&grid, |x| x);
        assert!((d - 0.5 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn uniform_against_square_cdf() {
        // sup |x - x^2| = 1/4 at x = 1/2
        let mut rng = stream(11, Purpose::Probe);
        let xs: Vec<f64> = (0..10_000).map(|_| open01(&mut rng)).collect();
        let d = ks_statistic(&xs, |x| x * x);
        assert!((d - 0.25).abs() < 0.02, "d = {d}");
    }

    #[test]
    fn kolmogorov_series_branches_agree() {
        // the two series representations meet near lambda = 1.18
        let pi2 = std::f64::consts::PI.powi(2);
        for &l in &[0.9, 1.0, 1.18, 1.3] {
            let theta: f64 = 1.0
                - (2.0 * std::f64::consts::PI).sqrt() / l
                    * (1..30)
                        .map(|k| {
                            let j = (2 * k - 1) as f64;
                            (-(j * j) * pi2 / (8.0 * l * l)).exp()
                        })
                        .sum::<f64>();
            let alt: f64 = 2.0
                * (1..100)
                    .map(|k| {
                        let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                        s * (-2.0 * (k * k) as f64 * l * l).exp()
                    })
                    .sum::<f64>();
            assert!((theta - alt).abs() < 1e-12, "lambda {l}: {theta} vs {alt}");
            assert!((kolmogorov_sf(l) - alt).abs() < 1e-12);
        }
        // known quantiles of the Kolmogorov distribution
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.9495) - 0.001).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let a = [0.1, 0.4, 0.4, 0.9];
        let r = ks_two_sample("same", &a, &a, 1e-3).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn two_sample_shifted_rejects() {
        let mut rng = stream(5, Purpose::Probe);
        let a: Vec<f64> = (0..1000).map(|_| open01(&mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        let r = ks_two_sample("shift", &a, &b, 1e-3).unwrap();
        assert!((r.statistic - 0.5).abs() < 0.06);
        assert!(!r.pass);
    }

    #[test]
    fn two_sample_size_on_independent_uniforms() {
        let mut rng = stream(6, Purpose::Probe);
        let mut passes = 0;
        for _ in 0..200 {
            let a: Vec<f64> = (0..1000).map(|_| open01(&mut rng)).collect();
            let b: Vec<f64> = (0..1000).map(|_| open01(&mut rng)).collect();
            passes += ks_two_sample("iid", &a, &b, 1e-3).unwrap().pass as usize;
        }
        assert!(passes >= 198, "{passes}");
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(ks_one_sample("e", &[], |x| x, 0.01).is_err());
        assert!(ks_two_sample("e", &[], &[1.0], 0.01).is_err());
        assert!(chi_square_pmf("e", &[0, 0], |_| 0.5, 0.01).is_err());
    }

    #[test]
    fn proportional_counts_give_zero_statistic() {
        let pmf = [0.25, 0.5, 0.25];
        let r = chi_square_pmf("prop", &[25, 50, 25], |k| pmf.get(k).copied().unwrap_or(0.0), 1e-3)
            .unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn single_bin_is_degenerate() {
        let err = chi_square_pmf("one", &[6], |k| if k == 0 { 1.0 } else { 0.0 }, 1e-3);
        assert!(matches!(err, Err(Error::DegenerateTest(_))));
    }

    #[test]
    fn merging_reaches_minimum_expectation() {
        let e = [1.0, 2.0, 3.0, 10.0, 4.0, 0.5];
        let o = [1.0, 2.0, 3.0, 10.0, 4.0, 0.5];
        let bins = merge_bins(&e, &o);
        assert!(bins.iter().all(|b| b.0 >= MIN_EXPECTED));
        assert_eq!(bins.iter().map(|b| b.0).sum::<f64>(), 20.5);
    }

    #[test]
    fn correlation_extremes_fail() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| -x).collect();
        let same = correlation_ci("same", &a, &a).unwrap();
        assert!((same.statistic - 1.0).abs() < 1e-12);
        assert!(!same.pass);
        let neg = correlation_ci("neg", &a, &b).unwrap();
        assert!((neg.statistic + 1.0).abs() < 1e-12);
        assert!(!neg.pass);
    }

    #[test]
    fn correlation_errors() {
        let a = vec![1.0; 40];
        let b: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert_eq!(correlation_ci("c", &a, &b), Err(Error::UndefinedCorrelation));
        assert!(correlation_ci("short", &b[..10], &b[..10]).is_err());
    }

    #[test]
    fn report_pass_matches_p_value() {
        let r = TestReport::new("x", 0.0, 0.5, 10, 0.5);
        assert!(!r.pass);
        let z = TestReport::z_bound("z", 3.9, 10);
        assert!(z.pass);
        let z = TestReport::z_bound("z", -4.1, 10);
        assert!(!z.pass);
    }

    #[test]
    fn report_json_shape() {
        let r = TestReport::new("k", 0.1, 0.2, SampleSize::Two(3, 4), 0.01);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["n"], serde_json::json!([3, 4]));
        for key in ["name", "statistic", "p_value", "n", "pass", "significance"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
