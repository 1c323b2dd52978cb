//! Finitely-atomic probability measures on the line and the
//! quantile/measure dictionary: the pushforward of Lebesgue measure by a
//! monotone step function is an atomic measure, the map is a bijective
//! isometry, and the quadratic Wasserstein distance of two measures equals
//! the L2 distance of their quantile functions.

use crate::error::{Error, Result};
use crate::step_fn::StepFunction;
use crate::testfn::ScalarC2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    /// Strictly increasing atom positions.
    pub positions: Vec<f64>,
    /// Positive masses summing to one.
    pub masses: Vec<f64>,
}

impl AtomicMeasure {
    /// Build from (position, mass) pairs; co-located atoms are merged.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("measure needs at least one atom"));
        }
        if atoms.iter().any(|&(x, m)| !x.is_finite() || !(m > 0.0)) {
            return Err(Error::invalid("atoms need finite positions and positive masses"));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut positions = vec![atoms[0].0];
        let mut masses = vec![atoms[0].1];
        for &(x, m) in &atoms[1..] {
            if x == *positions.last().unwrap() {
                *masses.last_mut().unwrap() += m;
            } else {
                positions.push(x);
                masses.push(m);
            }
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("atom masses must sum to 1, got {total}")));
        }
        Ok(AtomicMeasure { positions, masses })
    }

    pub fn dirac(x: f64) -> Self {
        AtomicMeasure { positions: vec![x], masses: vec![1.0] }
    }

    pub fn num_atoms(&self) -> usize {
        self.positions.len()
    }

    /// Second moment; equals `norm2_sq` of the quantile function.
    pub fn second_moment(&self) -> f64 {
        self.positions
            .iter()
            .zip(&self.masses)
            .map(|(&x, &m)| m * x * x)
            .sum()
    }

    /// Pairing with a scalar test function: `sum_atoms mass * f(position)`.
    pub fn pair(&self, f: &ScalarC2) -> f64 {
        self.positions
            .iter()
            .zip(&self.masses)
            .map(|(&x, &m)| m * f.eval(x))
            .sum()
    }

    /// Unweighted pairing of the atom support with `f''`:
    /// `sum_atoms f''(position)`.
    pub fn pair_support_d2(&self, f: &ScalarC2) -> f64 {
        self.positions.iter().map(|&x| f.d2(x)).sum()
    }
}

/// Pushforward of Lebesgue measure on [0,1] by the monotone step function
/// `g`: an atom at each value with mass equal to the cell width.
pub fn measure_of(g: &StepFunction) -> Result<AtomicMeasure> {
    if !g.is_monotone() {
        return Err(Error::invalid("quantile function must be strictly increasing"));
    }
    AtomicMeasure::new(g.cells().map(|(lo, hi, v)| (v, hi - lo)).collect())
}

/// Right-continuous quantile function of an atomic measure; inverse of
/// [`measure_of`] on canonical step functions.
pub fn quantile_of(mu: &AtomicMeasure) -> StepFunction {
    let mut breaks = Vec::with_capacity(mu.num_atoms() - 1);
    let mut acc = 0.0;
    for &m in &mu.masses[..mu.masses.len() - 1] {
        acc += m;
        breaks.push(acc);
    }
    StepFunction::new(breaks, mu.positions.clone())
        .expect("atomic measure yields a canonical monotone step function")
}

/// Quadratic Wasserstein distance via quantiles: the exact L2 distance of
/// the two step functions.
pub fn w2_quantile(g1: &StepFunction, g2: &StepFunction) -> f64 {
    g1.dist2_sq(g2).sqrt()
}

/// Expand a measure with masses `k/d` into `d` unit cells.
fn unit_cells(mu: &AtomicMeasure, d: u32) -> Option<Vec<f64>> {
    let mut cells = Vec::with_capacity(d as usize);
    for (&x, &m) in mu.positions.iter().zip(&mu.masses) {
        let k = m * d as f64;
        let r = k.round();
        if r < 0.5 || (k - r).abs() > 1e-9 * d as f64 {
            return None;
        }
        for _ in 0..r as u32 {
            cells.push(x);
        }
    }
    (cells.len() == d as usize).then_some(cells)
}

/// Smallest common denominator `d <= max_d` such that all masses of both
/// measures are integer multiples of `1/d`.
pub fn common_denominator(a: &AtomicMeasure, b: &AtomicMeasure, max_d: u32) -> Option<u32> {
    (1..=max_d).find(|&d| unit_cells(a, d).is_some() && unit_cells(b, d).is_some())
}

/// Brute-force optimal transport between measures with commensurable masses:
/// expand both to `d` unit cells and match them. In one dimension the sorted
/// (monotone) matching is optimal; the test suite verifies this against the
/// exhaustive permutation minimum for small `d`.
pub fn w2_bruteforce(a: &AtomicMeasure, b: &AtomicMeasure) -> Result<f64> {
    let d = common_denominator(a, b, 64)
        .ok_or_else(|| Error::invalid("masses are not commensurable with denominator <= 64"))?;
    let xa = unit_cells(a, d).unwrap();
    let xb = unit_cells(b, d).unwrap();
    // both already sorted: monotone matching
    let cost: f64 = xa
        .iter()
        .zip(&xb)
        .map(|(&x, &y)| (x - y) * (x - y) / d as f64)
        .sum();
    Ok(cost.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use rand::Rng;

    fn perm_min_cost(xa: &[f64], xb: &mut Vec<f64>) -> f64 {
        // Heap's algorithm over xb permutations
        fn rec(k: usize, xa: &[f64], xb: &mut Vec<f64>, best: &mut f64) {
            if k <= 1 {
                let c: f64 = xa.iter().zip(xb.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum();
                if c < *best {
                    *best = c;
                }
                return;
            }
            for i in 0..k {
                rec(k - 1, xa, xb, best);
                if k % 2 == 0 {
                    xb.swap(i, k - 1);
                } else {
                    xb.swap(0, k - 1);
                }
            }
        }
        let mut best = f64::INFINITY;
        let n = xb.len();
        rec(n, xa, xb, &mut best);
        best
    }

    #[test]
    fn dictionary_round_trip() {
        let g = StepFunction::new(vec![0.5], vec![-1.0, 1.0]).unwrap();
        let mu = measure_of(&g).unwrap();
        assert_eq!(mu.positions, vec![-1.0, 1.0]);
        assert_eq!(mu.masses, vec![0.5, 0.5]);
        assert_eq!(quantile_of(&mu), g);
        let c = StepFunction::constant(2.0);
        assert_eq!(measure_of(&c).unwrap(), AtomicMeasure::dirac(2.0));
    }

    #[test]
    fn w2_examples() {
        let d0 = StepFunction::constant(0.0);
        let d1 = StepFunction::constant(1.0);
        assert_eq!(w2_quantile(&d0, &d1), 1.0);
        let pm = StepFunction::new(vec![0.5], vec![-1.0, 1.0]).unwrap();
        assert_eq!(w2_quantile(&d0, &pm), 1.0);
    }

    #[test]
    fn bruteforce_examples() {
        let d0 = AtomicMeasure::dirac(0.0);
        assert_eq!(w2_bruteforce(&d0, &d0).unwrap(), 0.0);
        let u3 = AtomicMeasure::new(vec![(0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0)])
            .unwrap();
        let w = w2_bruteforce(&d0, &u3).unwrap();
        assert!((w - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn second_moment_is_norm_squared() {
        let g = StepFunction::new(vec![0.25, 0.5], vec![-2.0, 0.5, 3.0]).unwrap();
        let mu = measure_of(&g).unwrap();
        assert!((mu.second_moment() - g.norm2_sq()).abs() < 1e-14);
    }

    #[test]
    fn quantile_distance_matches_bruteforce() {
        let mut rng = stream_rng(17, 0);
        for _ in 0..200 {
            let d = rng.gen_range(1..=8u32);
            let gen = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut xs: Vec<f64> =
                    (0..d).map(|_| (rng.gen_range(-20..20) as f64) / 4.0).collect();
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                AtomicMeasure::new(xs.into_iter().map(|x| (x, 1.0 / d as f64)).collect()).unwrap()
            };
            let a = gen(&mut rng);
            let b = gen(&mut rng);
            let w_br = w2_bruteforce(&a, &b).unwrap();
            let w_q = w2_quantile(&quantile_of(&a), &quantile_of(&b));
            assert!((w_br - w_q).abs() < 1e-10, "{w_br} vs {w_q}");
        }
    }

    #[test]
    fn sorted_matching_is_optimal_small() {
        let mut rng = stream_rng(18, 0);
        for _ in 0..100 {
            let d = rng.gen_range(2..=6usize);
            let mut xa: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut xb: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            xa.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xb.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let sorted: f64 = xa.iter().zip(&xb).map(|(&x, &y)| (x - y) * (x - y)).sum();
            let best = perm_min_cost(&xa, &mut xb);
            assert!((sorted - best).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_and_symmetry() {
        let mut rng = stream_rng(19, 0);
        for _ in 0..100 {
            let gen = |rng: &mut rand_chacha::ChaCha8Rng| {
                let n = rng.gen_range(1..=4usize);
                let mut b: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.05..0.95)).collect();
                b.sort_by(|a, c| a.partial_cmp(c).unwrap());
                b.dedup();
                let mut v: Vec<f64> = (0..=b.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                v.sort_by(|a, c| a.partial_cmp(c).unwrap());
                v.dedup();
                while v.len() < b.len() + 1 {
                    b.pop();
                }
                StepFunction::new(b, v).unwrap()
            };
            let (f, g, h) = (gen(&mut rng), gen(&mut rng), gen(&mut rng));
            assert!((w2_quantile(&f, &g) - w2_quantile(&g, &f)).abs() < 1e-14);
            assert!(w2_quantile(&f, &h) <= w2_quantile(&f, &g) + w2_quantile(&g, &h) + 1e-12);
        }
    }

    #[test]
    fn pairing_examples() {
        let mu = AtomicMeasure::dirac(0.0);
        assert_eq!(mu.pair(&ScalarC2::Const(3.0)), 3.0);
        assert_eq!(mu.pair(&ScalarC2::Quadratic { a: 1.0 }), 0.0);
        assert_eq!(mu.pair_support_d2(&ScalarC2::Quadratic { a: 1.0 }), 2.0);
        // splitting an atom into co-located halves does not change pairings
        let split =
            AtomicMeasure::new(vec![(0.0, 0.5), (0.0, 0.5)]).unwrap();
        assert_eq!(split, mu);
    }
}
