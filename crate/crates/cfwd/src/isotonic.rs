//! Weighted isotonic projection (pool-adjacent-violators).
//!
//! `project(x, m, tol)` returns the minimizer of `sum m_i (y_i - x_i)^2`
//! over non-decreasing `y`, together with the cluster partition of the
//! pooled result detected at tolerance `tol`. This is the metric projection
//! of a post-step state back onto the ordered cone, and simultaneously the
//! coalescence rule: neighbours that would cross are merged at their
//! mass-weighted mean.

use crate::error::Result;
use crate::partition::{MassVector, Partition};

/// Pool-adjacent-violators with weights `m`. Returns `(y, partition)` where
/// `y` is the projection and `partition` groups coordinates equal within `tol`.
pub fn project(x: &[f64], m: &MassVector, tol: f64) -> Result<(Vec<f64>, Partition)> {
    assert_eq!(x.len(), m.len(), "positions/masses length mismatch");
    // Stack of pooled blocks: (end index (exclusive), weight, weighted mean).
    let mut ends: Vec<usize> = Vec::with_capacity(x.len());
    let mut weight: Vec<f64> = Vec::with_capacity(x.len());
    let mut mean: Vec<f64> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        ends.push(i + 1);
        weight.push(m[i]);
        mean.push(x[i]);
        while mean.len() > 1 && mean[mean.len() - 2] >= mean[mean.len() - 1] {
            let (w2, mu2) = (weight.pop().unwrap(), mean.pop().unwrap());
            let e2 = ends.pop().unwrap();
            let k = mean.len() - 1;
            let w = weight[k] + w2;
            mean[k] = (weight[k] * mean[k] + w2 * mu2) / w;
            weight[k] = w;
            ends[k] = e2;
        }
    }
    let mut y = vec![0.0; x.len()];
    let mut start = 0;
    for (k, &e) in ends.iter().enumerate() {
        for i in start..e {
            y[i] = mean[k];
        }
        start = e;
    }
    let partition = Partition::from_positions(&y, tol)?;
    Ok((y, partition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use rand::Rng;

    /// Exhaustive minimizer over all 2^(n-1) contiguous poolings: for each
    /// pooling take mass-weighted block means; keep the best feasible
    /// (non-decreasing) candidate.
    fn brute_force(x: &[f64], m: &MassVector) -> Vec<f64> {
        let n = x.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0..(1u32 << (n - 1)) {
            // bit i set = boundary between i and i+1
            let mut y = vec![0.0; n];
            let mut start = 0;
            let mut feasible = true;
            let mut prev = f64::NEG_INFINITY;
            for i in 0..n {
                let boundary = i == n - 1 || mask >> i & 1 == 1;
                if boundary {
                    let (mut w, mut s) = (0.0, 0.0);
                    for j in start..=i {
                        w += m[j];
                        s += m[j] * x[j];
                    }
                    let mu = s / w;
                    if mu < prev {
                        feasible = false;
                        break;
                    }
                    prev = mu;
                    for j in start..=i {
                        y[j] = mu;
                    }
                    start = i + 1;
                }
            }
            if !feasible {
                continue;
            }
            let cost: f64 = (0..n).map(|i| m[i] * (y[i] - x[i]) * (y[i] - x[i])).sum();
            if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                best = Some((cost, y));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn weighted_midpoint() {
        let m = MassVector::new(vec![0.5, 0.5]).unwrap();
        let (y, p) = project(&[1.0, 0.0], &m, 1e-9).unwrap();
        assert_eq!(y, vec![0.5, 0.5]);
        assert_eq!(p.num_blocks(), 1);
    }

    #[test]
    fn ordered_input_unchanged() {
        let m = MassVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let (y, p) = project(&[-1.0, 0.0, 3.0], &m, 1e-9).unwrap();
        assert_eq!(y, vec![-1.0, 0.0, 3.0]);
        assert_eq!(p.num_blocks(), 3);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = stream_rng(5, 0);
        for trial in 0..300 {
            let n = rng.gen_range(2..=10);
            let mut masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = masses.iter().sum();
            masses.iter_mut().for_each(|m| *m /= s);
            let m = MassVector::new(masses).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (y, _) = project(&x, &m, 1e-9).unwrap();
            let yb = brute_force(&x, &m);
            for i in 0..n {
                assert!(
                    (y[i] - yb[i]).abs() < 1e-10,
                    "trial {trial}: pava {y:?} vs brute {yb:?} for x={x:?}"
                );
            }
        }
    }

    #[test]
    fn output_is_ordered() {
        let mut rng = stream_rng(6, 0);
        for _ in 0..200 {
            let n = 12;
            let m = MassVector::uniform(n);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (y, _) = project(&x, &m, 1e-9).unwrap();
            assert!(y.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
