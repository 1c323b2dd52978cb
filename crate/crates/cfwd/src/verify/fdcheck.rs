//! Finite-difference validation of the closed-form gradient.
//!
//! For random cylinder functions `U`, random monotone states `g`, and random
//! perturbation directions `k` measurable with respect to `g` (i.e. constant
//! on its cells — the gradient lives in that subspace), the central
//! difference `(U(g + eps k) - U(g - eps k)) / (2 eps)` must match
//! `<grad U(g), k>` to near machine precision.

use crate::diffops::gradient;
use crate::seed::stream_rng;
use crate::stats::StatReport;
use crate::step_fn::StepFunction;
use crate::testfn::{Bump, PolySquash, TestFunctionFC};
use rand::Rng;

fn random_state(rng: &mut impl Rng) -> StepFunction {
    let n = rng.gen_range(1..=5usize);
    let breaks = loop {
        let mut b: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.05..0.95)).collect();
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        if b.windows(2).all(|w| w[1] - w[0] > 0.02) {
            break b;
        }
    };
    let mut values = Vec::with_capacity(n);
    let mut v = rng.gen_range(-1.0..0.0);
    for _ in 0..n {
        values.push(v);
        v += rng.gen_range(0.05..0.5);
    }
    StepFunction::new(breaks, values).expect("constructed monotone")
}

fn random_direction(rng: &mut impl Rng) -> StepFunction {
    let n = rng.gen_range(1..=4usize);
    let mut breaks: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.1..0.9)).collect();
    breaks.sort_by(|a, c| a.partial_cmp(c).unwrap());
    breaks.dedup_by(|a, c| (*a - *c).abs() < 1e-3);
    let values: Vec<f64> = (0..breaks.len() + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    StepFunction::piecewise(breaks, values).expect("valid piecewise")
}

fn random_cylinder(rng: &mut impl Rng, g: &StepFunction) -> TestFunctionFC {
    let vars = rng.gen_range(0..=2usize);
    let directions: Vec<StepFunction> = (0..vars).map(|_| random_direction(rng)).collect();
    let n_terms = rng.gen_range(1..=3usize);
    let terms: Vec<(f64, Vec<u8>)> = (0..n_terms)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                (0..vars).map(|_| rng.gen_range(0..=3u8)).collect(),
            )
        })
        .collect();
    let u = if vars == 0 {
        PolySquash::one(0)
    } else {
        PolySquash::new(vars, terms).expect("degrees capped at three")
    };
    // keep the state well inside the cutoff support so the bump derivatives
    // stay moderate
    let radius = (g.norm2_sq() * 2.0).max(0.5);
    TestFunctionFC::new(u, directions, Bump { radius }).expect("arity matches")
}

/// Run `trials` random (function, state, direction) triples; returns a bound
/// report on the worst relative mismatch, which must stay below `1e-5`.
pub fn gradient_fd_suite(trials: u64, seed: u64) -> StatReport {
    let mut rng = stream_rng(seed, 0);
    let eps = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let g = random_state(&mut rng);
        let fc = random_cylinder(&mut rng, &g);
        // perturbation constant on the cells of g
        let k_vals: Vec<f64> = (0..g.num_values()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k = StepFunction::piecewise(g.breaks().to_vec(), k_vals).expect("cells of g");
        let plus = StepFunction::linear_comb(&[(1.0, &g), (eps, &k)]);
        let minus = StepFunction::linear_comb(&[(1.0, &g), (-eps, &k)]);
        let fd = (fc.eval(&plus) - fc.eval(&minus)) / (2.0 * eps);
        let pred = gradient(&fc, &g).inner(&k);
        let scale = pred.abs().max(fd.abs()).max(1e-2);
        worst = worst.max((fd - pred).abs() / scale);
    }
    StatReport::bound("gradient_fd_worst_rel_err", worst, 1e-5, 0.0, trials)
}
