//! Particle clusters: ordered partitions of `{0,…,n-1}` into contiguous
//! blocks, mass-weighted block projections, and the shared-noise map.
//!
//! A block is a maximal run of co-located particles. All particles of a block
//! move together: they receive the block average of any drift field and a
//! common Gaussian increment whose variance is `dt / block_mass`.

use crate::error::{Error, Result};
use crate::step_fn::StepFunction;

/// Positive masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector(Vec<f64>);

impl MassVector {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::invalid("empty mass vector"));
        }
        if masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::invalid("masses must be positive and finite"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("masses must sum to 1, got {total}")));
        }
        Ok(MassVector(masses))
    }

    pub fn uniform(n: usize) -> Self {
        MassVector(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Cumulative masses u_0 = 0 < u_1 < … < u_n = 1.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.0.len() + 1);
        u.push(0.0);
        let mut acc = 0.0;
        for &m in &self.0 {
            acc += m;
            u.push(acc);
        }
        *u.last_mut().unwrap() = 1.0;
        u
    }
}

impl std::ops::Index<usize> for MassVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Ordered partition of `{0,…,n-1}` into contiguous blocks.
///
/// Stored as block boundaries: block `k` is `bounds[k]..bounds[k+1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    bounds: Vec<usize>,
}

impl Partition {
    pub fn from_bounds(bounds: Vec<usize>, n: usize) -> Result<Self> {
        if bounds.first() != Some(&0) || bounds.last() != Some(&n) {
            return Err(Error::invalid("partition bounds must start at 0 and end at n"));
        }
        if bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("partition bounds must be strictly increasing"));
        }
        Ok(Partition { bounds })
    }

    pub fn singletons(n: usize) -> Self {
        Partition { bounds: (0..=n).collect() }
    }

    pub fn one_block(n: usize) -> Self {
        Partition { bounds: vec![0, n] }
    }

    /// Detect maximal blocks of neighbouring positions with successive gaps
    /// at most `tol` (chained: a block is closed under neighbour proximity).
    pub fn from_positions(x: &[f64], tol: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::invalid("empty position vector"));
        }
        if x.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("positions must be ordered"));
        }
        let mut bounds = vec![0];
        for i in 1..x.len() {
            if x[i] - x[i - 1] > tol {
                bounds.push(i);
            }
        }
        bounds.push(x.len());
        Ok(Partition { bounds })
    }

    pub fn num_blocks(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn n(&self) -> usize {
        *self.bounds.last().unwrap()
    }

    pub fn block(&self, k: usize) -> std::ops::Range<usize> {
        self.bounds[k]..self.bounds[k + 1]
    }

    pub fn blocks(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.num_blocks()).map(move |k| self.block(k))
    }

    /// Interior block boundaries (indices strictly between 0 and n).
    pub fn interior_bounds(&self) -> &[usize] {
        &self.bounds[1..self.bounds.len() - 1]
    }
}

fn check_dims(p: &Partition, m: &MassVector, v: &[f64]) -> Result<()> {
    if p.n() != m.len() || v.len() != m.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: partition n={}, masses={}, vector={}",
            p.n(),
            m.len(),
            v.len()
        )));
    }
    Ok(())
}

/// Mass-weighted block averaging: within each block every coordinate is
/// replaced by `sum(m_i v_i) / block_mass`. Idempotent, and self-adjoint in
/// the mass-weighted inner product.
pub fn mass_average(p: &Partition, m: &MassVector, v: &[f64]) -> Result<Vec<f64>> {
    check_dims(p, m, v)?;
    let mut out = vec![0.0; v.len()];
    for block in p.blocks() {
        let mut mass = 0.0;
        let mut num = 0.0;
        for i in block.clone() {
            mass += m[i];
            num += m[i] * v[i];
        }
        let avg = num / mass;
        for i in block {
            out[i] = avg;
        }
    }
    Ok(out)
}

/// Shared-noise increments for one time step: every coordinate of block `k`
/// receives `sqrt(dt) * sum_{i in k} sqrt(m_i) w_i / block_mass`, so the
/// common block increment has variance `dt / block_mass`.
pub fn block_noise(p: &Partition, m: &MassVector, w: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_dims(p, m, w)?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let sqrt_dt = dt.sqrt();
    let mut out = vec![0.0; w.len()];
    for block in p.blocks() {
        let mut mass = 0.0;
        let mut acc = 0.0;
        for i in block.clone() {
            mass += m[i];
            acc += m[i].sqrt() * w[i];
        }
        let inc = sqrt_dt * acc / mass;
        for i in block {
            out[i] = inc;
        }
    }
    Ok(out)
}

/// Full simulator state: ordered positions, masses, current cluster
/// structure, and time.
#[derive(Debug, Clone)]
pub struct ParticleState {
    pub positions: Vec<f64>,
    pub masses: MassVector,
    pub partition: Partition,
    pub time: f64,
}

impl ParticleState {
    /// State with all particles at co-located `positions` groups detected at
    /// tolerance `tol`, positions snapped to exact block averages.
    pub fn new(positions: Vec<f64>, masses: MassVector, tol: f64) -> Result<Self> {
        if positions.len() != masses.len() {
            return Err(Error::invalid("positions/masses length mismatch"));
        }
        let partition = Partition::from_positions(&positions, tol)?;
        let snapped = mass_average(&partition, &masses, &positions)?;
        Ok(ParticleState { positions: snapped, masses, partition, time: 0.0 })
    }

    /// The quantile function of the empirical measure: a monotone step
    /// function on `[0,1]` in mass coordinates, one value per block.
    pub fn quantile(&self) -> StepFunction {
        let u = self.masses.cumulative();
        let breaks: Vec<f64> = self.partition.interior_bounds().iter().map(|&i| u[i]).collect();
        let values: Vec<f64> = self
            .partition
            .blocks()
            .map(|b| self.positions[b.start])
            .collect();
        StepFunction::new(breaks, values)
            .expect("block positions of an ordered state are strictly increasing")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use rand::Rng;

    #[test]
    fn partition_detection() {
        let p = Partition::from_positions(&[0.0, 0.0, 1.0], 1e-12).unwrap();
        assert_eq!(p.bounds, vec![0, 2, 3]);
        let p = Partition::from_positions(&[0.0, 1.0, 2.0], 1e-12).unwrap();
        assert_eq!(p.num_blocks(), 3);
        let p = Partition::from_positions(&[0.0, 1e-13, 2e-13, 5.0], 1e-12).unwrap();
        assert_eq!(p.bounds, vec![0, 3, 4]);
        assert!(Partition::from_positions(&[1.0, 0.0], 1e-12).is_err());
    }

    #[test]
    fn mass_average_examples() {
        let m = MassVector::new(vec![0.5, 0.5]).unwrap();
        let merged = Partition::one_block(2);
        assert_eq!(mass_average(&merged, &m, &[0.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        let split = Partition::singletons(2);
        assert_eq!(mass_average(&split, &m, &[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        let m3 = MassVector::new(vec![0.25, 0.25, 0.5]).unwrap();
        let all = Partition::one_block(3);
        let avg = mass_average(&all, &m3, &[1.0, 2.0, 3.0]).unwrap();
        assert!(avg.iter().all(|&v| (v - 2.25).abs() < 1e-15));
    }

    #[test]
    fn mass_average_idempotent_and_self_adjoint() {
        let mut rng = stream_rng(11, 0);
        for _ in 0..50 {
            let n = 6;
            let mut masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = masses.iter().sum();
            masses.iter_mut().for_each(|m| *m /= s);
            let m = MassVector::new(masses).unwrap();
            let p = Partition::from_bounds(vec![0, 2, 3, 6], n).unwrap();
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pu = mass_average(&p, &m, &u).unwrap();
            let ppu = mass_average(&p, &m, &pu).unwrap();
            for i in 0..n {
                assert!((pu[i] - ppu[i]).abs() < 1e-13);
            }
            let pv = mass_average(&p, &m, &v).unwrap();
            let lhs: f64 = (0..n).map(|i| m[i] * pu[i] * v[i]).sum();
            let rhs: f64 = (0..n).map(|i| m[i] * u[i] * pv[i]).sum();
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn block_noise_examples() {
        let m = MassVector::new(vec![0.5, 0.5]).unwrap();
        let dt = 0.01;
        let split = Partition::singletons(2);
        let out = block_noise(&split, &m, &[1.0, -2.0], dt).unwrap();
        assert!((out[0] - (2.0 * dt).sqrt()).abs() < 1e-15);
        assert!((out[1] + 2.0 * (2.0 * dt).sqrt()).abs() < 1e-15);
        let merged = Partition::one_block(2);
        let out = block_noise(&merged, &m, &[1.0, 2.0], dt).unwrap();
        let expect = 3.0 * (0.5f64).sqrt() * dt.sqrt();
        assert!((out[0] - expect).abs() < 1e-15);
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn block_noise_variance_monte_carlo() {
        // empirical variance of a merged block's increment ~ dt / block_mass
        let m = MassVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let p = Partition::from_bounds(vec![0, 2, 3], 3).unwrap();
        let dt = 0.02;
        let mut rng = stream_rng(42, 0);
        let trials = 1_000_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..trials {
            let w: [f64; 3] = [
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
            ];
            let out = block_noise(&p, &m, &w, dt).unwrap();
            sum += out[0];
            sumsq += out[0] * out[0];
        }
        let mean = sum / trials as f64;
        let var = sumsq / trials as f64 - mean * mean;
        let target = dt / 0.5; // block mass 0.2 + 0.3
        assert!((var - target).abs() / target < 0.01, "var {var} vs {target}");
    }

    #[test]
    fn quantile_of_state() {
        let m = MassVector::new(vec![0.25, 0.25, 0.5]).unwrap();
        let s = ParticleState::new(vec![-1.0, -1.0, 2.0], m, 1e-9).unwrap();
        let g = s.quantile();
        assert_eq!(g.breaks(), &[0.5]);
        assert_eq!(g.values(), &[-1.0, 2.0]);
    }
}
