//! Deterministic statistical reductions.
//!
//! All ensemble reductions in the crate go through [`pairwise_sum`] so that
//! results do not depend on the number of worker threads: parallel stages
//! produce per-task values in task order, and the reduction itself is a fixed
//! binary tree.

use serde::Serialize;

/// Sum with a fixed pairwise (binary tree) association.
///
/// Error grows like O(log n · eps) instead of O(n · eps) for naive
/// accumulation, and the result is independent of chunking upstream.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = pairwise_sum(xs) / n as f64;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// One verification statistic with its Monte-Carlo uncertainty.
#[derive(Debug, Clone, Serialize)]
pub struct StatReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Value the estimate is tested against.
    pub hypothesized: f64,
    pub z: f64,
    pub samples: u64,
    pub threshold: f64,
    pub pass: bool,
}

impl StatReport {
    /// z-test of `estimate` against `hypothesized` at |z| <= threshold.
    pub fn z_test(
        name: impl Into<String>,
        estimate: f64,
        std_error: f64,
        hypothesized: f64,
        samples: u64,
        threshold: f64,
    ) -> Self {
        let z = if std_error > 0.0 {
            (estimate - hypothesized) / std_error
        } else if estimate == hypothesized {
            0.0
        } else {
            f64::INFINITY
        };
        StatReport {
            name: name.into(),
            estimate,
            std_error,
            hypothesized,
            z,
            samples,
            threshold,
            pass: z.abs() <= threshold,
        }
    }

    /// Report that passes iff `value <= limit`; `z` stores the ratio.
    pub fn bound(
        name: impl Into<String>,
        value: f64,
        limit: f64,
        std_error: f64,
        samples: u64,
    ) -> Self {
        StatReport {
            name: name.into(),
            estimate: value,
            std_error,
            hypothesized: limit,
            z: if limit != 0.0 { value / limit } else { f64::INFINITY },
            samples,
            threshold: 1.0,
            pass: value <= limit,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{}: {} estimate={:.6e} se={:.2e} target={:.6e} z={:.3}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.estimate,
            self.std_error,
            self.hypothesized,
            self.z
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..17).map(|i| i as f64 * 0.1).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn pairwise_is_chunking_independent() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let a = pairwise_sum(&xs);
        // Same data, reduced as two halves then combined: identical tree.
        let b = pairwise_sum(&xs[..500]) + pairwise_sum(&xs[500..]);
        assert_eq!(a, b);
    }

    #[test]
    fn mean_se_basics() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        let var: f64 = 5.0 / 3.0;
        assert!((se - (var / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn z_test_pass_fail() {
        assert!(StatReport::z_test("a", 0.1, 0.05, 0.0, 10, 4.0).pass);
        assert!(!StatReport::z_test("b", 0.5, 0.05, 0.0, 10, 4.0).pass);
    }
}
