//! Mean curves with 95% confidence intervals across repeated runs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("cannot summarise an empty sample")]
    Empty,
    #[error("sample contains a non-finite value; cap penalties first")]
    NonFinite,
}

/// How the half-width of the interval is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interval {
    /// `1.96 * sd / sqrt(n)`.
    #[default]
    Normal,
    /// Two-sided 95% Student-t quantile with `n - 1` degrees of freedom.
    StudentT,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub generation: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

/// Summarises finite values; `generation` is left at 0.
pub fn summarize(values: &[f64]) -> Result<CurveSummary, StatsError> {
    summarize_with(values, Interval::Normal)
}

pub fn summarize_with(values: &[f64], interval: Interval) -> Result<CurveSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let half = if n == 1 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let z = match interval {
            Interval::Normal => 1.96,
            Interval::StudentT => StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975),
        };
        z * var.sqrt() / (n as f64).sqrt()
    };
    Ok(CurveSummary {
        generation: 0,
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
        n,
    })
}

/// Finite stand-in for penalty values: ten times the worst finite value,
/// `1.0` when that is not positive, `1e12` when nothing is finite.
pub fn penalty_cap(values: &[f64]) -> f64 {
    match values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .reduce(f64::max)
    {
        Some(w) if w > 0.0 => 10.0 * w,
        Some(_) => 1.0,
        None => 1e12,
    }
}

/// Replaces non-finite values by [`penalty_cap`] of the same slice.
pub fn cap_penalties(values: &[f64]) -> Vec<f64> {
    let cap = penalty_cap(values);
    values
        .iter()
        .map(|&v| if v.is_finite() { v } else { cap })
        .collect()
}

/// Summarises one statistic per generation. `runs[r][g]` is run `r`'s value
/// at generation `g`; runs may have different lengths. Non-finite values
/// are capped over the whole cell before averaging.
pub fn summarize_curves(runs: &[Vec<f64>], interval: Interval) -> Vec<CurveSummary> {
    let all: Vec<f64> = runs.iter().flatten().copied().collect();
    let cap = penalty_cap(&all);
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .filter_map(|g| {
            let vals: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.get(g))
                .map(|&v| if v.is_finite() { v } else { cap })
                .collect();
            summarize_with(&vals, interval).ok().map(|mut s| {
                s.generation = g;
                s
            })
        })
        .collect()
}

impl CurveSummary {
    pub fn overlaps(&self, other: &CurveSummary) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_width() {
        let s = summarize(&[5.0]).unwrap();
        assert_eq!((s.mean, s.ci_low, s.ci_high, s.n), (5.0, 5.0, 5.0, 1));
    }

    #[test]
    fn one_two_three() {
        let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.ci_high - 2.0 - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        assert!((s.ci_high - s.mean - 1.1316).abs() < 1e-4);
    }

    #[test]
    fn constant_sample() {
        let s = summarize(&[4.0; 7]).unwrap();
        assert_eq!(s.ci_low, 4.0);
        assert_eq!(s.ci_high, 4.0);
    }

    #[test]
    fn errors() {
        assert_eq!(summarize(&[]), Err(StatsError::Empty));
        assert_eq!(summarize(&[1.0, f64::INFINITY]), Err(StatsError::NonFinite));
    }

    #[test]
    fn t_interval_is_wider() {
        let v = [1.0, 2.0, 3.0];
        let n = summarize_with(&v, Interval::Normal).unwrap();
        let t = summarize_with(&v, Interval::StudentT).unwrap();
        assert!(t.ci_high > n.ci_high);
        // t(0.975, 2) = 4.302653
        assert!((t.ci_high - 2.0 - 4.302_653 / 3f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn caps() {
        assert_eq!(penalty_cap(&[1.0, 3.0, f64::INFINITY]), 30.0);
        assert_eq!(penalty_cap(&[0.0, f64::INFINITY]), 1.0);
        assert_eq!(penalty_cap(&[f64::INFINITY]), 1e12);
        assert_eq!(cap_penalties(&[2.0, f64::NAN]), vec![2.0, 20.0]);
    }

    #[test]
    fn curves_by_generation() {
        let runs = vec![vec![3.0, 2.0, 1.0], vec![5.0, f64::INFINITY]];
        let c = summarize_curves(&runs, Interval::Normal);
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].mean, 4.0);
        assert_eq!(c[1].mean, (2.0 + 50.0) / 2.0);
        assert_eq!(c[2].n, 1);
        assert_eq!(c[2].generation, 2);
    }
}
