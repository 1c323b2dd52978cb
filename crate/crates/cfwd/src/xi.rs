//! The sigma-finite invariant measure on monotone step functions.
//!
//! For a non-decreasing driver `xi` with jump locations `r_1 < … < r_J` and
//! jump heights `w_j`, the stratum-`n` measure lives on step functions with
//! `n` values whose breakpoints are `(n-1)`-tuples of jump locations. Its
//! weight on the breakpoint tuple `q` is `prod_i (q_i - q_{i-1})` times the
//! product of the chosen jump heights, and given `q` the value vector is
//! Lebesgue on the ordered cone.
//!
//! The measure is sigma-finite, not finite, so everything here is restricted
//! to a centered L2 ball of radius `r`. On the ball the sampler is exact:
//! breakpoint tuples are drawn from an alias table weighted by
//! `tuple_weight * bounding_box_volume`, values uniformly from the bounding
//! box `|x_i| <= r / sqrt(dq_i)`, and the pair is accepted iff the values
//! are ordered and inside the ellipsoid `sum x_i^2 dq_i <= r^2`. Accepted
//! draws follow the normalized restricted measure with unit importance
//! weight, and the box total times the acceptance rate is an unbiased
//! estimate of the stratum mass of the ball.

use crate::error::{Error, Result};
use crate::partition::{MassVector, Partition};
use crate::step_fn::StepFunction;
use rand::Rng;

/// Gamma(n/2) for integer n >= 1, in closed form.
pub fn gamma_half_integer(n: u32) -> f64 {
    assert!(n >= 1);
    if n % 2 == 0 {
        // (n/2 - 1)!
        (1..n / 2).map(|k| k as f64).product()
    } else {
        // Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!), n = 2k + 1
        let k = (n - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for j in 1..=k {
            v *= j as f64 - 0.5;
        }
        v
    }
}

/// Upper bound for the stratum-`n` mass of the centered ball of radius `r`:
/// `2 pi^{n/2} r^n span^{n-1} / (n! Gamma(n/2))` where `span` is the total
/// increase of the driver.
pub fn stratum_ball_bound(n: u32, r: f64, span: f64) -> f64 {
    let nf = n as f64;
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    2.0 * std::f64::consts::PI.powf(nf / 2.0) * r.powf(nf) * span.powf(nf - 1.0)
        / (factorial * gamma_half_integer(n))
}

/// Weight of the breakpoint tuple `q` relative to the product jump measure:
/// `prod_i (q_i - q_{i-1})` with the conventions `q_0 = 0`, `q_n = 1`.
pub fn breakpoint_density(q: &[f64]) -> Result<f64> {
    let mut prev = 0.0;
    let mut dens = 1.0;
    for &qi in q {
        if !(qi > prev && qi < 1.0) {
            return Err(Error::invalid("breakpoints must be strictly increasing in (0,1)"));
        }
        dens *= qi - prev;
        prev = qi;
    }
    Ok(dens * (1.0 - prev))
}

/// Exact weight of a cluster configuration in the finite-dimensional
/// reversible measure: the product of block masses times the product of
/// level gaps across consecutive block boundaries (`i_k` = last index of
/// block `k`).
pub fn cluster_weight(p: &Partition, m: &MassVector, levels: &[f64]) -> Result<f64> {
    if p.n() != m.len() || levels.len() != m.len() {
        return Err(Error::invalid("dimension mismatch"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("levels must be strictly increasing"));
    }
    let mut weight = 1.0;
    for block in p.blocks() {
        weight *= block.clone().map(|i| m[i]).sum::<f64>();
    }
    for k in 0..p.num_blocks() - 1 {
        let last = p.block(k).end - 1;
        weight *= levels[last + 1] - levels[last];
    }
    Ok(weight)
}

/// One draw from a stratum of the ball-restricted measure.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    pub g: StepFunction,
    pub stratum: u32,
    /// Importance weight relative to the normalized restricted measure;
    /// the rejection sampler is exact, so this is always 1.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct MassEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// 99% confidence interval.
    pub ci99: (f64, f64),
    pub acceptance_rate: f64,
    pub proposals: u64,
}

/// Walker alias table for O(1) draws from a finite discrete distribution.
struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut small: Vec<usize> = (0..n).filter(|&i| scaled[i] < 1.0).collect();
        let mut large: Vec<usize> = (0..n).filter(|&i| scaled[i] >= 1.0).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] = scaled[l] + scaled[s] - 1.0;
            if scaled[l] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        AliasTable { prob, alias }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

struct Atom {
    /// Breakpoint tuple (n-1 jump locations of the driver).
    q: Vec<f64>,
    /// Cell widths (n entries).
    dq: Vec<f64>,
    /// Half-widths of the bounding box, `r / sqrt(dq_i)`.
    half_width: Vec<f64>,
}

/// Sampler and integrator for one stratum of the measure restricted to the
/// centered ball of radius `r`.
pub struct StratumSampler {
    n: u32,
    r: f64,
    atoms: Vec<Atom>,
    alias: AliasTable,
    /// Total proposal mass: sum over tuples of weight * box volume.
    box_total: f64,
}

pub const DEFAULT_MAX_TUPLES: usize = 4_000_000;

/// Extract jump locations and heights of a monotone step driver.
pub fn driver_jumps(xi: &StepFunction) -> Vec<(f64, f64)> {
    xi.breaks()
        .iter()
        .zip(xi.values().windows(2))
        .map(|(&q, w)| (q, w[1] - w[0]))
        .collect()
}

impl StratumSampler {
    pub fn build(xi: &StepFunction, n: u32, r: f64) -> Result<Self> {
        Self::build_with_cap(xi, n, r, DEFAULT_MAX_TUPLES)
    }

    pub fn build_with_cap(xi: &StepFunction, n: u32, r: f64, max_tuples: usize) -> Result<Self> {
        if !(r > 0.0) || n == 0 {
            return Err(Error::invalid("need n >= 1 and r > 0"));
        }
        if !xi.is_monotone() && xi.num_values() > 1 {
            return Err(Error::invalid("driver must be non-decreasing"));
        }
        let jumps = driver_jumps(xi);
        let k = (n - 1) as usize;
        if jumps.len() < k {
            return Err(Error::invalid(format!(
                "stratum {n} is null: driver has only {} distinct values",
                jumps.len() + 1
            )));
        }
        // number of (n-1)-subsets of the jump set
        let mut count: u128 = 1;
        for i in 0..k {
            count = count * (jumps.len() - i) as u128 / (i + 1) as u128;
            if count > max_tuples as u128 {
                return Err(Error::invalid(format!(
                    "stratum {n} has more than {max_tuples} breakpoint tuples; \
                     use a coarser driver resolution"
                )));
            }
        }
        let mut atoms = Vec::with_capacity(count as usize);
        let mut weights = Vec::with_capacity(count as usize);
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let q: Vec<f64> = idx.iter().map(|&j| jumps[j].0).collect();
            let height: f64 = idx.iter().map(|&j| jumps[j].1).product();
            let mut dq = Vec::with_capacity(k + 1);
            let mut prev = 0.0;
            for &qi in &q {
                dq.push(qi - prev);
                prev = qi;
            }
            dq.push(1.0 - prev);
            let mu: f64 = height * dq.iter().product::<f64>();
            let half_width: Vec<f64> = dq.iter().map(|&d| r / d.sqrt()).collect();
            let box_vol: f64 = half_width.iter().map(|&h| 2.0 * h).product();
            weights.push(mu * box_vol);
            atoms.push(Atom { q, dq, half_width });
            // next combination in lexicographic order
            if k == 0 {
                break;
            }
            let mut advanced = false;
            for i in (0..k).rev() {
                if idx[i] != i + jumps.len() - k {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        let box_total: f64 = weights.iter().sum();
        let alias = AliasTable::new(&weights);
        Ok(StratumSampler { n, r, atoms, alias, box_total })
    }

    pub fn stratum(&self) -> u32 {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    /// Total proposal (bounding box) mass; an upper bound for the stratum
    /// mass of the ball.
    pub fn box_total(&self) -> f64 {
        self.box_total
    }

    /// One proposal: `Some(g)` if accepted, `None` if rejected. Accepted
    /// draws are exactly distributed as the normalized restricted measure.
    pub fn propose(&self, rng: &mut impl Rng) -> Option<StepFunction> {
        let atom = &self.atoms[self.alias.draw(rng)];
        let mut x = Vec::with_capacity(atom.dq.len());
        let mut prev = f64::NEG_INFINITY;
        let mut quad = 0.0;
        for (i, &hw) in atom.half_width.iter().enumerate() {
            let xi = rng.gen_range(-hw..hw);
            if xi <= prev {
                // still consume the remaining coordinates? not needed:
                // rejection only requires that accepted draws are exact.
                return None;
            }
            quad += xi * xi * atom.dq[i];
            if quad > self.r * self.r {
                return None;
            }
            x.push(xi);
            prev = xi;
        }
        Some(
            StepFunction::new(atom.q.clone(), x)
                .expect("ordered values over driver jump tuples form a canonical step function"),
        )
    }

    /// Draw one accepted sample, with a budget on proposals.
    pub fn draw(&self, rng: &mut impl Rng, budget: u64) -> Result<WeightedSample> {
        for _ in 0..budget {
            if let Some(g) = self.propose(rng) {
                return Ok(WeightedSample { g, stratum: self.n, weight: 1.0 });
            }
        }
        Err(Error::numerical(format!(
            "rejection budget {budget} exhausted in stratum {} (acceptance rate below {:.2e})",
            self.n,
            1.0 / budget as f64
        )))
    }

    /// Unbiased estimate of `integral of f` over this stratum of the ball:
    /// `box_total * mean(f(g) * accepted)` over `proposals` proposals.
    /// Returns (estimate, standard error, acceptance rate).
    pub fn integrate(
        &self,
        proposals: u64,
        rng: &mut impl Rng,
        mut f: impl FnMut(&StepFunction) -> f64,
    ) -> (f64, f64, f64) {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut accepted = 0u64;
        for _ in 0..proposals {
            if let Some(g) = self.propose(rng) {
                accepted += 1;
                let v = f(&g);
                sum += v;
                sum_sq += v * v;
            }
        }
        let n = proposals as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0) / (n - 1.0);
        (self.box_total * mean, self.box_total * var.sqrt(), accepted as f64 / n)
    }

    /// Hit-or-miss estimate of the stratum mass of the ball.
    pub fn estimate_mass(&self, proposals: u64, rng: &mut impl Rng) -> MassEstimate {
        let (estimate, std_error, acceptance_rate) = self.integrate(proposals, rng, |_| 1.0);
        MassEstimate {
            estimate,
            std_error,
            ci99: (estimate - 2.576 * std_error, estimate + 2.576 * std_error),
            acceptance_rate,
            proposals,
        }
    }
}

/// Convenience: the driver `u -> u` discretized to `k` uniform jumps.
pub fn identity_driver(k: usize) -> StepFunction {
    StepFunction::from_grid_fn(|u| u, k).expect("identity discretization is valid")
}

/// Driver with prescribed jump locations and heights, starting at `base`.
pub fn jump_driver(base: f64, jumps: &[(f64, f64)]) -> Result<StepFunction> {
    let mut breaks = Vec::with_capacity(jumps.len());
    let mut values = vec![base];
    let mut level = base;
    for &(q, h) in jumps {
        if h <= 0.0 {
            return Err(Error::invalid("jump heights must be positive"));
        }
        breaks.push(q);
        level += h;
        values.push(level);
    }
    StepFunction::new(breaks, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use crate::step_fn::MonotoneFn;

    #[test]
    fn gamma_half_values() {
        assert!((gamma_half_integer(2) - 1.0).abs() < 1e-15);
        assert!((gamma_half_integer(4) - 1.0).abs() < 1e-15);
        assert!((gamma_half_integer(6) - 2.0).abs() < 1e-15);
        let pi = std::f64::consts::PI;
        assert!((gamma_half_integer(1) - pi.sqrt()).abs() < 1e-14);
        assert!((gamma_half_integer(3) - 0.5 * pi.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn ball_bound_examples() {
        let pi = std::f64::consts::PI;
        assert!((stratum_ball_bound(2, 1.0, 1.0) - pi).abs() < 1e-14);
        assert!((stratum_ball_bound(1, 1.0, 1.0) - 2.0).abs() < 1e-14);
        assert!((stratum_ball_bound(1, 0.3, 1.0) - 0.6).abs() < 1e-14);
        // summable over n for fixed r
        let total: f64 = (1..60).map(|n| stratum_ball_bound(n, 2.0, 1.0)).sum();
        assert!(total.is_finite());
        assert!(stratum_ball_bound(40, 2.0, 1.0) < stratum_ball_bound(10, 2.0, 1.0));
    }

    #[test]
    fn breakpoint_density_examples() {
        assert!((breakpoint_density(&[0.5]).unwrap() - 0.25).abs() < 1e-15);
        let d = breakpoint_density(&[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert!((d - 1.0 / 27.0).abs() < 1e-15);
        assert_eq!(breakpoint_density(&[]).unwrap(), 1.0);
        assert!(breakpoint_density(&[0.7, 0.3]).is_err());
    }

    #[test]
    fn cluster_weight_examples() {
        let m = MassVector::new(vec![0.5, 0.5]).unwrap();
        let levels = [0.0, 1.0];
        let split = Partition::singletons(2);
        assert!((cluster_weight(&split, &m, &levels).unwrap() - 0.25).abs() < 1e-15);
        let merged = Partition::one_block(2);
        assert!((cluster_weight(&merged, &m, &levels).unwrap() - 1.0).abs() < 1e-15);
        assert!(cluster_weight(&split, &m, &[1.0, 0.0]).is_err());
    }

    /// The single-jump driver identifies the two-particle reversible weights
    /// with the stratum weights of the measure.
    #[test]
    fn cluster_weight_matches_stratum_atom() {
        let s0 = 0.3;
        let xi = jump_driver(0.0, &[(s0, 1.0)]).unwrap();
        let m = MassVector::new(vec![s0, 1.0 - s0]).unwrap();
        // split configuration weight = m1 * m2 * (level gap 1)
        let w = cluster_weight(&Partition::singletons(2), &m, &[0.0, 1.0]).unwrap();
        let jumps = driver_jumps(&xi);
        let mu = breakpoint_density(&[jumps[0].0]).unwrap() * jumps[0].1;
        assert!((w - mu).abs() < 1e-15);
    }

    #[test]
    fn null_stratum_reports_error() {
        let xi = jump_driver(0.0, &[(0.5, 1.0)]).unwrap(); // 2 values
        assert!(StratumSampler::build(&xi, 3, 1.0).is_err());
        assert!(StratumSampler::build(&xi, 2, 1.0).is_ok());
    }

    #[test]
    fn stratum_one_is_uniform_on_segment() {
        let xi = identity_driver(16);
        let s = StratumSampler::build(&xi, 1, 1.0).unwrap();
        let mut rng = stream_rng(21, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let w = s.draw(&mut rng, 100).unwrap();
            assert_eq!(w.g.num_values(), 1);
            sum += w.g.values()[0];
        }
        let mean = sum / n as f64;
        // uniform on [-1,1]: sd of mean = 1/sqrt(3n)
        assert!(mean.abs() < 3.0 / (3.0 * n as f64).sqrt());
        // stratum mass exact: 2r
        let m = s.estimate_mass(1000, &mut rng);
        assert!((m.estimate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn samples_live_in_ball_and_are_measurable() {
        let xi = identity_driver(32);
        let mono = MonotoneFn::Step(xi.clone());
        let mut rng = stream_rng(22, 0);
        for n in 2..=4u32 {
            let s = StratumSampler::build(&xi, n, 1.5).unwrap();
            for _ in 0..200 {
                let w = s.draw(&mut rng, 1_000_000).unwrap();
                assert!(w.g.num_values() <= n as usize);
                assert!(w.g.norm2_sq() <= 1.5 * 1.5 + 1e-12);
                assert!(w.g.is_measurable_wrt(&mono));
            }
        }
    }

    #[test]
    fn two_particle_mass_matches_closed_form() {
        // single jump at 1/2 of height 1: stratum-2 ball mass is
        // tuple weight (1/4) times the area of the ordered half of the
        // ellipse (x1^2 + x2^2)/2 <= r^2, i.e. pi r^2 / 4.
        let xi = jump_driver(0.0, &[(0.5, 1.0)]).unwrap();
        let r = 0.8;
        let s = StratumSampler::build(&xi, 2, r).unwrap();
        let mut rng = stream_rng(23, 0);
        let m = s.estimate_mass(400_000, &mut rng);
        let exact = std::f64::consts::PI * r * r / 4.0;
        assert!(
            (m.estimate - exact).abs() < 3.0 * m.std_error,
            "{} vs {exact} (se {})",
            m.estimate,
            m.std_error
        );
        // all samples carry the jump location as breakpoint
        let w = s.draw(&mut rng, 10_000).unwrap();
        assert_eq!(w.g.breaks(), &[0.5]);
    }

    #[test]
    fn ellipse_radius_ratio() {
        // P(|g| <= r') / P(|g| <= r) for the single-jump stratum-2 sampler
        // follows the area ratio (r'/r)^2.
        let xi = jump_driver(0.0, &[(0.5, 1.0)]).unwrap();
        let r = 1.0;
        let s = StratumSampler::build(&xi, 2, r).unwrap();
        let mut rng = stream_rng(24, 0);
        let n = 200_000;
        let rp = 0.6;
        let mut inside = 0u64;
        for _ in 0..n {
            let w = s.draw(&mut rng, 1_000_000).unwrap();
            if w.g.norm2_sq() <= rp * rp {
                inside += 1;
            }
        }
        let frac = inside as f64 / n as f64;
        assert!((frac - rp * rp).abs() < 0.005, "frac {frac}");
    }

    #[test]
    fn mass_respects_bound_and_scales() {
        let xi = identity_driver(24);
        let span = xi.eval(1.0) - xi.eval(0.0);
        let mut rng = stream_rng(25, 0);
        for n in 1..=4u32 {
            for &r in &[0.5, 1.0] {
                let s = StratumSampler::build(&xi, n, r).unwrap();
                let m = s.estimate_mass(200_000, &mut rng);
                let bound = stratum_ball_bound(n, r, span);
                assert!(m.ci99.0 <= bound, "n={n} r={r}: {} vs bound {bound}", m.estimate);
            }
        }
        // log-log slope of mass in r approximately n
        let n = 3u32;
        let (r1, r2) = (0.4, 0.8);
        let m1 = StratumSampler::build(&xi, n, r1)
            .unwrap()
            .estimate_mass(400_000, &mut rng);
        let m2 = StratumSampler::build(&xi, n, r2)
            .unwrap()
            .estimate_mass(400_000, &mut rng);
        let slope = (m2.estimate / m1.estimate).ln() / (r2 / r1).ln();
        assert!((slope - n as f64).abs() < 0.1, "slope {slope}");
    }
}
