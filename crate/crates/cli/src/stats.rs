//! Comparisons between paired and independent rollout samples.

use c2sim_core::train::{mean, std_dev};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// One-sided paired t-test of `H1: mean(a − b) > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub std_diff: f64,
    pub t: f64,
    pub p_value: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    assert!(a.len() >= 2, "need at least two pairs");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mean_diff = mean(&d);
    let std_diff = std_dev(&d);
    let se = std_diff / (n as f64).sqrt();
    let (t, p_value) = if se > 0.0 {
        let t = mean_diff / se;
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2");
        (t, 1.0 - dist.cdf(t))
    } else if mean_diff > 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (if mean_diff < 0.0 { f64::NEG_INFINITY } else { 0.0 }, 1.0)
    };
    PairedTest { n, mean_diff, std_diff, t, p_value }
}

/// Standard error of a sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Difference of means in units of its standard error, treating the
/// samples as independent.
pub fn separation(a: &[f64], b: &[f64]) -> f64 {
    let se = standard_error(a).hypot(standard_error(b));
    let diff = mean(a) - mean(b);
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Fraction of pairs where `a` is at least `b`.
pub fn paired_win_rate(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    a.iter().zip(b).filter(|(x, y)| x >= y).count() as f64 / a.len() as f64
}
