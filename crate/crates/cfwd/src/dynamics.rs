//! Time integration of the sticky-reflected coalescing-fragmentating
//! particle system.
//!
//! One step of the scheme, from an ordered state with cluster partition
//! `theta`:
//!
//! 1. Euler–Maruyama proposal: `x' = x + drift * dt + shared noise`, where
//!    the drift is half the deviation of the level vector from its
//!    block average (zero on singletons) and the noise gives every particle
//!    of a block the identical increment of variance `dt / block_mass`;
//! 2. weighted isotonic projection of `x'` back onto the ordered cone —
//!    neighbours that would cross are pooled at their mass-weighted mean,
//!    which is exactly the coalescence rule;
//! 3. cluster re-detection at the merge tolerance, positions snapped to
//!    block averages.
//!
//! Fragmentation needs no event handling: a block whose members have
//! distinct levels receives divergent within-block drifts and separates in
//! the next step (the shared noise cancels inside a block). The occupation
//! time of merged states carries an O(sqrt(dt)) discretization bias, which
//! the verification suite tracks by dt-refinement.

use crate::error::{Error, Result};
use crate::isotonic;
use crate::partition::{block_noise, mass_average, MassVector, ParticleState};
use crate::seed::stream_rng;
use crate::step_fn::MonotoneFn;
use crate::wasserstein::AtomicMeasure;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub masses: MassVector,
    /// Level (interaction) vector, one entry per particle, non-decreasing.
    pub levels: Vec<f64>,
    pub dt: f64,
    pub t_final: f64,
    pub merge_tol: f64,
    pub seed: u64,
    pub record_every: usize,
    /// Starting positions; all zeros when empty.
    pub initial_positions: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.masses.len();
        if self.levels.len() != n {
            return Err(Error::invalid("levels length must match particle count"));
        }
        if self.levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("levels must be non-decreasing"));
        }
        if !(self.dt > 0.0) || !(self.t_final > 0.0) || !(self.merge_tol > 0.0) {
            return Err(Error::invalid("dt, t_final and merge_tol must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        if !self.initial_positions.is_empty() && self.initial_positions.len() != n {
            return Err(Error::invalid("initial positions length must match particle count"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<ParticleState> {
        let x = if self.initial_positions.is_empty() {
            vec![0.0; self.masses.len()]
        } else {
            self.initial_positions.clone()
        };
        ParticleState::new(x, self.masses.clone(), self.merge_tol)
    }
}

/// Sample the driver at the mass-cell midpoints: `levels[i] =
/// xi((u_{i-1}+u_i)/2)` with `u` the cumulative masses.
pub fn levels_from_driver(xi: &MonotoneFn, masses: &MassVector) -> Vec<f64> {
    let u = masses.cumulative();
    (0..masses.len())
        .map(|i| xi.eval(0.5 * (u[i] + u[i + 1])))
        .collect()
}

/// Drift of the state: half the deviation of the levels from their block
/// averages. Zero on singleton blocks; mass-weighted block sums vanish.
pub fn drift(state: &ParticleState, levels: &[f64]) -> Result<Vec<f64>> {
    let avg = mass_average(&state.partition, &state.masses, levels)?;
    Ok(levels.iter().zip(&avg).map(|(l, a)| 0.5 * (l - a)).collect())
}

/// Reusable stepper holding the per-step scratch buffer.
pub struct Stepper {
    levels: Vec<f64>,
    dt: f64,
    merge_tol: f64,
    noise: Vec<f64>,
}

impl Stepper {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Stepper {
            levels: cfg.levels.clone(),
            dt: cfg.dt,
            merge_tol: cfg.merge_tol,
            noise: vec![0.0; cfg.masses.len()],
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Advance the state by one step of size `dt`.
    pub fn step(&mut self, state: &mut ParticleState, rng: &mut impl Rng) -> Result<()> {
        let mut proposal = Vec::new();
        self.step_traced(state, rng, &mut proposal)
    }

    /// Advance the state by one step, also writing the pre-projection Euler
    /// proposal `x + drift * dt + noise` into `proposal`. The projection's
    /// pooling defect on nonlinear pairings is a pure discretization
    /// artifact (the exact process coalesces at zero gap, where the defect
    /// vanishes), so statistics that must be unbiased are evaluated on the
    /// proposal rather than on the projected state.
    pub fn step_traced(
        &mut self,
        state: &mut ParticleState,
        rng: &mut impl Rng,
        proposal: &mut Vec<f64>,
    ) -> Result<()> {
        let n = state.positions.len();
        for w in self.noise.iter_mut() {
            *w = rng.sample(StandardNormal);
        }
        let d = drift(state, &self.levels)?;
        let shared = block_noise(&state.partition, &state.masses, &self.noise, self.dt)?;
        proposal.clear();
        proposal.reserve(n);
        for i in 0..n {
            proposal.push(state.positions[i] + d[i] * self.dt + shared[i]);
        }
        let (pooled, partition) = isotonic::project(proposal, &state.masses, self.merge_tol)?;
        let snapped = mass_average(&partition, &state.masses, &pooled)?;
        if snapped.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite state at t = {}",
                state.time
            )));
        }
        state.positions = snapped;
        state.partition = partition;
        state.time += self.dt;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub positions: Vec<f64>,
    /// Interior block boundaries in cumulative-mass coordinates.
    pub boundaries: Vec<f64>,
    pub atom_count: usize,
    pub center_of_mass: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub masses: MassVector,
    pub snapshots: Vec<Snapshot>,
}

fn snapshot(state: &ParticleState) -> Snapshot {
    let u = state.masses.cumulative();
    let com = state
        .positions
        .iter()
        .zip(state.masses.as_slice())
        .map(|(x, m)| x * m)
        .sum();
    Snapshot {
        time: state.time,
        positions: state.positions.clone(),
        boundaries: state.partition.interior_bounds().iter().map(|&i| u[i]).collect(),
        atom_count: state.partition.num_blocks(),
        center_of_mass: com,
    }
}

/// Integrate one trajectory; deterministic for a fixed config.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut state = cfg.initial_state()?;
    let mut stepper = Stepper::new(cfg)?;
    let mut rng = stream_rng(cfg.seed, 0);
    let steps = (cfg.t_final / cfg.dt).ceil() as usize;
    let mut snapshots = Vec::with_capacity(steps / cfg.record_every + 2);
    snapshots.push(snapshot(&state));
    for k in 1..=steps {
        stepper.step(&mut state, &mut rng)?;
        if k % cfg.record_every == 0 || k == steps {
            snapshots.push(snapshot(&state));
        }
    }
    Ok(Trajectory { masses: cfg.masses.clone(), snapshots })
}

/// Pushforward of the mass distribution by the positions: one atom per
/// cluster, with the summed block mass.
pub fn empirical_measure(state: &ParticleState) -> AtomicMeasure {
    let atoms: Vec<(f64, f64)> = state
        .partition
        .blocks()
        .map(|b| {
            let mass: f64 = b.clone().map(|i| state.masses[i]).sum();
            (state.positions[b.start], mass)
        })
        .collect();
    AtomicMeasure::new(atoms).expect("cluster masses of a valid state sum to one")
}
