//! First- and second-order differential operators on cylinder functions.
//!
//! For `U(g) = u(<g,h_1>,…,<g,h_m>) * phi(|g|^2)` evaluated at a step
//! function `g` with cells of widths `dq_i`:
//!
//! * the projected L2 gradient is
//!   `grad U(g) = phi * sum_j du_j * E[h_j | g] + u * phi' * 2g`,
//!   a step function measurable with respect to `g`;
//! * the second-order operator is the image of
//!   `sum_i (1/dq_i) d^2/dx_i^2` through the coordinates of `g`:
//!   `phi * sum_{ij} d2u_{ij} <E[h_i|g], E[h_j|g]>
//!    + u * (4 phi'' |g|^2 + 2 phi' * #g) + 4 phi' * sum_j du_j <h_j, g>`;
//! * the generator of the dynamics driven by the monotone `xi` is
//!   `L U = (second_order + phi * sum_j du_j <h_j, xi - E[xi|g]>) / 2`.
//!
//! `E[.|g]` denotes the conditional expectation given the level sets of `g`
//! ([`StepFunction::conditional_on`]).

use crate::step_fn::StepFunction;
use crate::testfn::TestFunctionFC;

/// Projected L2 gradient of `u_fn` at `g`; always a step function with
/// breakpoints contained in those of `g`.
pub fn gradient(u_fn: &TestFunctionFC, g: &StepFunction) -> StepFunction {
    let p = u_fn.at(g);
    let projected: Vec<StepFunction> =
        u_fn.directions.iter().map(|h| h.conditional_on(g)).collect();
    let mut terms: Vec<(f64, &StepFunction)> = Vec::with_capacity(projected.len() + 1);
    for (j, ph) in projected.iter().enumerate() {
        terms.push((p.phi * p.du[j], ph));
    }
    terms.push((2.0 * p.u * p.dphi, g));
    StepFunction::linear_comb(&terms)
}

/// Second-order part of the generator at a step function `g`.
pub fn second_order(u_fn: &TestFunctionFC, g: &StepFunction) -> f64 {
    let p = u_fn.at(g);
    if p.phi == 0.0 && p.dphi == 0.0 && p.d2phi == 0.0 {
        return 0.0;
    }
    let projected: Vec<StepFunction> =
        u_fn.directions.iter().map(|h| h.conditional_on(g)).collect();
    let m = projected.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            if p.d2u[i][j] != 0.0 {
                acc += p.d2u[i][j] * projected[i].inner(&projected[j]);
            }
        }
    }
    let mut out = p.phi * acc;
    out += p.u * (4.0 * p.d2phi * p.norm_sq + 2.0 * p.dphi * g.num_values() as f64);
    let cross: f64 = (0..m).map(|j| p.du[j] * u_fn.directions[j].inner(g)).sum();
    out += 4.0 * p.dphi * cross;
    out
}

/// Interaction term `phi(|g|^2) * sum_j du_j * <h_j, xi - E[xi|g]>`.
///
/// This is also the boundary defect appearing in the integration-by-parts
/// identity for the invariant measure.
pub fn interaction_term(u_fn: &TestFunctionFC, g: &StepFunction, xi: &StepFunction) -> f64 {
    let p = u_fn.at(g);
    if p.phi == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (j, h) in u_fn.directions.iter().enumerate() {
        if p.du[j] != 0.0 {
            let ph = h.conditional_on(g);
            acc += p.du[j] * (xi.inner(h) - xi.inner(&ph));
        }
    }
    p.phi * acc
}

/// Full generator of the dynamics with driver `xi` applied to `u_fn` at `g`.
pub fn generator(u_fn: &TestFunctionFC, g: &StepFunction, xi: &StepFunction) -> f64 {
    0.5 * (second_order(u_fn, g) + interaction_term(u_fn, g, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::{Bump, PolySquash};

    fn u_poly2() -> PolySquash {
        // u = s1 - 0.5 s1^2 s2 + s2^3
        PolySquash::new(2, vec![(1.0, vec![1, 0]), (-0.5, vec![2, 1]), (1.0, vec![0, 3])])
            .unwrap()
    }

    fn sample_fc() -> TestFunctionFC {
        let h1 = StepFunction::piecewise(vec![0.4], vec![1.0, -0.5]).unwrap();
        let h2 = StepFunction::piecewise(vec![0.2, 0.7], vec![0.0, 2.0, 1.0]).unwrap();
        TestFunctionFC::new(u_poly2(), vec![h1, h2], Bump { radius: 6.0 }).unwrap()
    }

    fn sample_g() -> StepFunction {
        StepFunction::new(vec![0.3, 0.65], vec![-0.8, 0.1, 1.2]).unwrap()
    }

    #[test]
    fn pure_cutoff_gradient_is_radial() {
        let fc = TestFunctionFC::new(PolySquash::one(0), vec![], Bump { radius: 5.0 }).unwrap();
        let g = sample_g();
        let grad = gradient(&fc, &g);
        let factor = 2.0 * Bump { radius: 5.0 }.d1(g.norm2_sq());
        for ((_, _, gv), (_, _, dv)) in g.cells().zip(grad.cells()) {
            assert!((dv - factor * gv).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_is_measurable_wrt_g() {
        let fc = sample_fc();
        let g = sample_g();
        let grad = gradient(&fc, &g);
        for b in grad.breaks() {
            assert!(g.breaks().contains(b));
        }
    }

    /// The gradient through the coordinates of g: cell value i must equal
    /// (d/dx_i) U(step(q, x)) divided by the cell width.
    #[test]
    fn gradient_matches_coordinate_derivatives() {
        let fc = sample_fc();
        let g = sample_g();
        let q = g.breaks().to_vec();
        let x = g.values().to_vec();
        let widths = [0.3, 0.35, 0.35];
        let grad = gradient(&fc, &g);
        let eps = 1e-6;
        for i in 0..x.len() {
            let f = |t: f64| {
                let mut xx = x.clone();
                xx[i] = t;
                fc.eval(&StepFunction::new(q.clone(), xx).unwrap())
            };
            let fd = (f(x[i] + eps) - f(x[i] - eps)) / (2.0 * eps);
            let cell_value = grad.eval(if i == 0 { 0.0 } else { q[i - 1] });
            assert!(
                (cell_value - fd / widths[i]).abs() < 1e-6,
                "cell {i}: {cell_value} vs {}",
                fd / widths[i]
            );
        }
    }

    /// Directional derivative along the projected direction.
    #[test]
    fn gradient_matches_directional_finite_difference() {
        let fc = sample_fc();
        let g = sample_g();
        let f = StepFunction::piecewise(vec![0.3, 0.5], vec![1.0, -2.0, 0.5]).unwrap();
        let grad = gradient(&fc, &g);
        let pf = f.conditional_on(&g);
        let eps = 1e-4;
        let up = fc.eval(&StepFunction::linear_comb(&[(1.0, &g), (eps, &pf)]));
        let dn = fc.eval(&StepFunction::linear_comb(&[(1.0, &g), (-eps, &pf)]));
        let fd = (up - dn) / (2.0 * eps);
        let exact = grad.inner(&f);
        assert!((fd - exact).abs() / exact.abs().max(1e-12) < 1e-5);
    }

    /// second_order must be the image of sum_i (1/dq_i) d^2/dx_i^2.
    #[test]
    fn second_order_matches_coordinate_laplacian() {
        let fc = sample_fc();
        let g = sample_g();
        let q = g.breaks().to_vec();
        let x = g.values().to_vec();
        let widths = [0.3, 0.35, 0.35];
        let eps = 2e-4;
        let mut lap = 0.0;
        for i in 0..x.len() {
            let f = |t: f64| {
                let mut xx = x.clone();
                xx[i] = t;
                fc.eval(&StepFunction::new(q.clone(), xx).unwrap())
            };
            let d2 = (f(x[i] + eps) - 2.0 * f(x[i]) + f(x[i] - eps)) / (eps * eps);
            lap += d2 / widths[i];
        }
        let exact = second_order(&fc, &g);
        assert!(
            (lap - exact).abs() < 1e-4 * exact.abs().max(1.0),
            "fd {lap} vs exact {exact}"
        );
    }

    #[test]
    fn pure_cutoff_second_order() {
        let fc = TestFunctionFC::new(PolySquash::one(0), vec![], Bump { radius: 5.0 }).unwrap();
        let g = sample_g();
        let b = Bump { radius: 5.0 };
        let s = g.norm2_sq();
        let expect = 4.0 * b.d2(s) * s + 2.0 * b.d1(s) * 3.0;
        assert!((second_order(&fc, &g) - expect).abs() < 1e-13);
    }

    #[test]
    fn interaction_vanishes_for_measurable_driver() {
        let fc = sample_fc();
        let g = sample_g();
        // driver that is a function of g: constant on the cells of g
        let xi = StepFunction::new(vec![0.3], vec![0.0, 1.0]).unwrap();
        assert!(interaction_term(&fc, &g, &xi).abs() < 1e-14);
        let l = generator(&fc, &g, &xi);
        assert!((l - 0.5 * second_order(&fc, &g)).abs() < 1e-14);
    }
}
