//! Short-time transition asymptotics.
//!
//! For sets `A`, `B` of states, the transition weight
//! `P_t(A,B) = int_A Pr_g(X_t in B) dXi(g)` obeys
//! `-2t ln P_t(A,B) -> d(A,B)^2` as `t -> 0`, where `d` is the L2 distance
//! between the sets of quantile functions — on this space the intrinsic
//! metric is the quadratic transport distance of the associated measures.
//!
//! Two checks live here:
//!
//! * the single-constant stratum, where the process is one Brownian particle
//!   and `P_t` has an exact quadrature oracle usable at times far too small
//!   for simulation ([`varadhan_single`]);
//! * the two-particle state space over a single-jump driver, where `P_t` is
//!   estimated by simulation started from the normalized restriction of the
//!   invariant measure to a ball `A` (its mass is known in closed form) and
//!   the exponent is extrapolated to `t = 0` by a weighted fit over the
//!   basis `{1, t, t ln t}` ([`varadhan_pair`]). The `t ln t` term is not
//!   optional: the entropy of the corridor contributes
//!   `e(t) = d^2 + O(t ln t)`, so a linear fit has an intrinsic intercept
//!   bias that does not vanish with more paths or smaller steps.

use crate::dynamics::{SimConfig, Stepper};
use crate::error::{Error, Result};
use crate::partition::MassVector;
use crate::seed::stream_rng;
use crate::stats::StatReport;
use crate::xi::{jump_driver, StratumSampler};
use rand::Rng;
use rayon::prelude::*;

/// Exact `ln P_t(A,B)` for one Brownian particle with `A`, `B` intervals of
/// starting and ending positions, by trapezoid quadrature of the heat kernel
/// in the log domain (stable even when `P_t ~ exp(-500)`).
pub fn gaussian_corridor_exponent(a: (f64, f64), b: (f64, f64), t: f64) -> f64 {
    assert!(a.1 > a.0 && b.1 > b.0 && t > 0.0);
    let n = 400usize;
    let (wa, wb) = ((a.1 - a.0) / n as f64, (b.1 - b.0) / n as f64);
    // peak of the exponent over the grid, for log-sum-exp
    let gap = if b.0 > a.1 {
        b.0 - a.1
    } else if a.0 > b.1 {
        a.0 - b.1
    } else {
        0.0
    };
    let peak = -gap * gap / (2.0 * t);
    let mut sum = 0.0;
    for i in 0..=n {
        let x = a.0 + wa * i as f64;
        let ci = if i == 0 || i == n { 0.5 } else { 1.0 };
        for j in 0..=n {
            let y = b.0 + wb * j as f64;
            let cj = if j == 0 || j == n { 0.5 } else { 1.0 };
            let e = -(y - x) * (y - x) / (2.0 * t);
            sum += ci * cj * (e - peak).exp();
        }
    }
    peak + (sum * wa * wb).ln() - 0.5 * (2.0 * std::f64::consts::PI * t).ln()
}

/// Check the short-time limit on the constant stratum: `A = [-rho, rho]`,
/// `B = [center-rho, center+rho]`, exact exponent at time `t`, compared to
/// the squared set distance with relative tolerance `tol`.
pub fn varadhan_single(rho: f64, center: f64, t: f64, tol: f64) -> StatReport {
    assert!(center > 2.0 * rho, "sets must be disjoint");
    let d = center - 2.0 * rho;
    let ln_p = gaussian_corridor_exponent((-rho, rho), (center - rho, center + rho), t);
    let e = -2.0 * t * ln_p;
    StatReport::bound(
        format!("varadhan_single[t={t}]"),
        (e - d * d).abs(),
        tol * d * d,
        0.0,
        1,
    )
}

#[derive(Debug, Clone)]
pub struct PairConfig {
    /// Starting set: centered ball of this radius.
    pub rho: f64,
    /// Target set: ball of radius `rho` around the constant at this height.
    pub center: f64,
    /// Times at which the exponent is estimated; fit is extrapolated to 0.
    pub t_values: Vec<f64>,
    pub dt: f64,
    pub paths_per_t: u64,
    pub seed: u64,
    /// Relative tolerance on the extrapolated exponent.
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct PairResult {
    /// (t, exponent estimate, standard error) per time.
    pub points: Vec<(f64, f64, f64)>,
    pub intercept: f64,
    pub intercept_se: f64,
    /// Coefficient of the linear term in the fit.
    pub slope: f64,
    pub target: f64,
    pub report: StatReport,
}

/// Two-particle short-time check over the single-jump driver. The invariant
/// measure restricted to the ball `A = B_rho(0)` has the closed-form strata
/// masses `2 rho` (constants) and `pi rho^2 / 4` (two-level states), so an
/// exact start from the normalized restriction is available. The exponent
/// `e(t) = -2t ln Pr(X_t in B)` is fitted as `a + b t + c t ln t`; the
/// intercept `a` must match the squared set distance `(center - 2 rho)^2`.
pub fn varadhan_pair(cfg: &PairConfig) -> Result<PairResult> {
    if cfg.center <= 2.0 * cfg.rho {
        return Err(Error::invalid("start and target balls must be disjoint"));
    }
    if cfg.t_values.len() < 4 {
        return Err(Error::invalid("need at least four times for the three-term fit"));
    }
    let driver = jump_driver(0.0, &[(0.5, 1.0)])?;
    let s1 = StratumSampler::build(&driver, 1, cfg.rho)?;
    let s2 = StratumSampler::build(&driver, 2, cfg.rho)?;
    let mass1 = 2.0 * cfg.rho;
    let mass2 = std::f64::consts::PI * cfg.rho * cfg.rho / 4.0;
    let p_stratum1 = mass1 / (mass1 + mass2);
    let masses = MassVector::uniform(2);
    let levels = vec![0.0, 1.0];
    let rho2 = cfg.rho * cfg.rho;

    let mut points = Vec::with_capacity(cfg.t_values.len());
    for (ti, &t) in cfg.t_values.iter().enumerate() {
        let steps = (t / cfg.dt).ceil() as usize;
        let chunk: u64 = 256;
        let n_chunks = cfg.paths_per_t.div_ceil(chunk);
        let hit_counts: Vec<u64> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(cfg.seed, (ti as u64) << 32 | c);
                let this_chunk = chunk.min(cfg.paths_per_t - c * chunk);
                let mut hits = 0u64;
                for _ in 0..this_chunk {
                    let g = if rng.gen::<f64>() < p_stratum1 {
                        s1.draw(&mut rng, 1_000_000)
                    } else {
                        s2.draw(&mut rng, 1_000_000)
                    }
                    .expect("rejection budget ample for these strata")
                    .g;
                    let start = match g.values() {
                        [v] => vec![*v, *v],
                        [v1, v2] => vec![*v1, *v2],
                        _ => unreachable!("sampler strata are capped at two values"),
                    };
                    let sim = SimConfig {
                        masses: masses.clone(),
                        levels: levels.clone(),
                        dt: cfg.dt,
                        t_final: t,
                        merge_tol: 1e-9,
                        seed: 0,
                        record_every: 1,
                        initial_positions: start,
                    };
                    let mut state = sim.initial_state().expect("valid start");
                    let mut stepper = Stepper::new(&sim).expect("valid config");
                    for _ in 0..steps {
                        stepper.step(&mut state, &mut rng).expect("finite step");
                    }
                    let d0 = state.positions[0] - cfg.center;
                    let d1 = state.positions[1] - cfg.center;
                    if 0.5 * (d0 * d0 + d1 * d1) <= rho2 {
                        hits += 1;
                    }
                }
                hits
            })
            .collect();
        let hits: u64 = hit_counts.iter().sum();
        if hits == 0 {
            return Err(Error::numerical(format!(
                "no hits at t = {t}; increase paths or t"
            )));
        }
        let n = cfg.paths_per_t as f64;
        let p = hits as f64 / n;
        let se_p = (p * (1.0 - p) / n).sqrt();
        let e = -2.0 * t * p.ln();
        let se_e = 2.0 * t * se_p / p;
        points.push((t, e, se_e));
    }

    // weighted least squares e(t) = a + b t + c t ln t; the intercept and
    // its standard error come from the inverse of the 3x3 weighted normal
    // matrix (solved by Gaussian elimination on [N | I])
    let basis = |t: f64| [1.0, t, t * t.ln()];
    let mut normal = [[0.0f64; 6]; 3];
    let mut rhs = [0.0f64; 3];
    for &(t, e, s) in &points {
        let w = 1.0 / (s * s);
        let phi = basis(t);
        for i in 0..3 {
            for j in 0..3 {
                normal[i][j] += w * phi[i] * phi[j];
            }
            rhs[i] += w * phi[i] * e;
        }
    }
    for i in 0..3 {
        normal[i][3 + i] = 1.0;
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| normal[a][col].abs().total_cmp(&normal[b][col].abs()))
            .expect("non-empty range");
        normal.swap(col, pivot);
        let p = normal[col][col];
        if p.abs() < 1e-30 {
            return Err(Error::numerical("singular design matrix in exponent fit"));
        }
        for j in 0..6 {
            normal[col][j] /= p;
        }
        for row in 0..3 {
            if row != col {
                let f = normal[row][col];
                for j in 0..6 {
                    normal[row][j] -= f * normal[col][j];
                }
            }
        }
    }
    let cov = |i: usize, j: usize| normal[i][3 + j];
    let coef: Vec<f64> = (0..3).map(|i| (0..3).map(|j| cov(i, j) * rhs[j]).sum()).collect();
    let intercept = coef[0];
    let slope = coef[1];
    let intercept_se = cov(0, 0).sqrt();

    let d = cfg.center - 2.0 * cfg.rho;
    let target = d * d;
    let report = StatReport::bound(
        format!("varadhan_pair[rho={},center={}]", cfg.rho, cfg.center),
        (intercept - target).abs(),
        cfg.tol * target,
        intercept_se,
        cfg.paths_per_t * cfg.t_values.len() as u64,
    );
    Ok(PairResult { points, intercept, intercept_se, slope, target, report })
}
