//! Smooth test functions with closed-form derivatives.
//!
//! Two families live here:
//!
//! * [`ScalarC2`] — scalar C^2 functions on the line used to pair with
//!   empirical measures;
//! * [`TestFunctionFC`] — cylinder functions on L2 of the form
//!   `U(g) = u(<g,h_1>, …, <g,h_m>) * phi(|g|_2^2)` with a polynomial-in-tanh
//!   outer function `u` and a compactly supported bump cutoff `phi`. These
//!   have exact first and second derivatives, which the verification suites
//!   rely on.

use crate::error::{Error, Result};
use crate::step_fn::StepFunction;
use serde::{Deserialize, Serialize};

/// Smooth bump `x -> exp(1 - 1/(1-(x/R)^2))` on (-R,R), zero outside.
/// Returns (value, first, second derivative).
pub fn bump_c2(x: f64, radius: f64) -> (f64, f64, f64) {
    let t = x / radius;
    let w = 1.0 - t * t;
    if w <= 1e-12 {
        return (0.0, 0.0, 0.0);
    }
    let v = (1.0 - 1.0 / w).exp();
    let r2 = radius * radius;
    let d1 = v * (-2.0 * t) / (radius * w * w);
    let d2 = v * (4.0 * t * t / (w * w * w * w) - 2.0 / (w * w) - 8.0 * t * t / (w * w * w)) / r2;
    (v, d1, d2)
}

/// Scalar C^2 test functions with analytic derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarC2 {
    Const(f64),
    /// a*x + b
    Linear { a: f64, b: f64 },
    /// a*x^2
    Quadratic { a: f64 },
    /// sin(freq*x + phase)
    Sin { freq: f64, phase: f64 },
    /// sin(freq*x + phase) * bump(x; radius) — compact support
    SinBump { freq: f64, phase: f64, radius: f64 },
}

impl ScalarC2 {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarC2::Const(c) => c,
            ScalarC2::Linear { a, b } => a * x + b,
            ScalarC2::Quadratic { a } => a * x * x,
            ScalarC2::Sin { freq, phase } => (freq * x + phase).sin(),
            ScalarC2::SinBump { freq, phase, radius } => {
                (freq * x + phase).sin() * bump_c2(x, radius).0
            }
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            ScalarC2::Const(_) => 0.0,
            ScalarC2::Linear { a, .. } => a,
            ScalarC2::Quadratic { a } => 2.0 * a * x,
            ScalarC2::Sin { freq, phase } => freq * (freq * x + phase).cos(),
            ScalarC2::SinBump { freq, phase, radius } => {
                let (b, db, _) = bump_c2(x, radius);
                let arg = freq * x + phase;
                freq * arg.cos() * b + arg.sin() * db
            }
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            ScalarC2::Const(_) | ScalarC2::Linear { .. } => 0.0,
            ScalarC2::Quadratic { a } => 2.0 * a,
            ScalarC2::Sin { freq, phase } => -freq * freq * (freq * x + phase).sin(),
            ScalarC2::SinBump { freq, phase, radius } => {
                let (b, db, d2b) = bump_c2(x, radius);
                let arg = freq * x + phase;
                -freq * freq * arg.sin() * b + 2.0 * freq * arg.cos() * db + arg.sin() * d2b
            }
        }
    }
}

/// Multivariate polynomial composed with coordinate-wise tanh:
/// `u(y) = P(tanh(y_1), …, tanh(y_m))` with `deg P <= 3` per variable.
/// Bounded with bounded derivatives of all orders.
#[derive(Debug, Clone)]
pub struct PolySquash {
    vars: usize,
    /// (coefficient, exponent per variable)
    terms: Vec<(f64, Vec<u8>)>,
}

impl PolySquash {
    pub fn new(vars: usize, terms: Vec<(f64, Vec<u8>)>) -> Result<Self> {
        for (_, e) in &terms {
            if e.len() != vars {
                return Err(Error::invalid("exponent tuple length must equal vars"));
            }
            if e.iter().any(|&k| k > 3) {
                return Err(Error::invalid("per-variable degree capped at 3"));
            }
        }
        Ok(PolySquash { vars, terms })
    }

    /// The constant function 1 (empty product), useful for pure-cutoff tests.
    pub fn one(vars: usize) -> Self {
        PolySquash { vars, terms: vec![(1.0, vec![0; vars])] }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    fn poly(&self, s: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(s).map(|(&k, &x)| x.powi(k as i32)).product::<f64>())
            .sum()
    }

    fn poly_d(&self, s: &[f64], j: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                if e[j] == 0 {
                    return 0.0;
                }
                let mut p = c * e[j] as f64;
                for (k, (&ek, &x)) in e.iter().zip(s).enumerate() {
                    let pow = if k == j { ek - 1 } else { ek };
                    p *= x.powi(pow as i32);
                }
                p
            })
            .sum()
    }

    fn poly_dd(&self, s: &[f64], i: usize, j: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                let (fi, fj) = if i == j {
                    if e[i] < 2 {
                        return 0.0;
                    }
                    (e[i] as f64 * (e[i] - 1) as f64, 1.0)
                } else {
                    if e[i] == 0 || e[j] == 0 {
                        return 0.0;
                    }
                    (e[i] as f64, e[j] as f64)
                };
                let mut p = c * fi * fj;
                for (k, (&ek, &x)) in e.iter().zip(s).enumerate() {
                    let drop = if i == j && k == i {
                        2
                    } else if k == i || k == j {
                        1
                    } else {
                        0
                    };
                    p *= x.powi((ek - drop) as i32);
                }
                p
            })
            .sum()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let s: Vec<f64> = y.iter().map(|&v| v.tanh()).collect();
        self.poly(&s)
    }

    /// Gradient and Hessian via the chain rule through tanh.
    pub fn derivs(&self, y: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let s: Vec<f64> = y.iter().map(|&v| v.tanh()).collect();
        let ds: Vec<f64> = s.iter().map(|&t| 1.0 - t * t).collect();
        let dds: Vec<f64> = s.iter().zip(&ds).map(|(&t, &d)| -2.0 * t * d).collect();
        let val = self.poly(&s);
        let grad: Vec<f64> = (0..self.vars).map(|j| self.poly_d(&s, j) * ds[j]).collect();
        let hess: Vec<Vec<f64>> = (0..self.vars)
            .map(|i| {
                (0..self.vars)
                    .map(|j| {
                        let mut h = self.poly_dd(&s, i, j) * ds[i] * ds[j];
                        if i == j {
                            h += self.poly_d(&s, j) * dds[j];
                        }
                        h
                    })
                    .collect()
            })
            .collect();
        (val, grad, hess)
    }
}

/// Smooth cutoff `phi` applied to the squared L2 norm; support radius in the
/// squared-norm argument, i.e. `phi(s) = 0` for `|s| >= radius`.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub radius: f64,
}

impl Bump {
    pub fn eval(&self, s: f64) -> f64 {
        bump_c2(s, self.radius).0
    }
    pub fn d1(&self, s: f64) -> f64 {
        bump_c2(s, self.radius).1
    }
    pub fn d2(&self, s: f64) -> f64 {
        bump_c2(s, self.radius).2
    }
}

/// Cylinder test function `U(g) = u(<g,h_1>,…,<g,h_m>) * phi(|g|^2)`.
#[derive(Debug, Clone)]
pub struct TestFunctionFC {
    pub u: PolySquash,
    pub directions: Vec<StepFunction>,
    pub cutoff: Bump,
}

/// All first/second-order data of a cylinder function at a point `g`,
/// shared by the gradient and generator evaluations.
pub struct FcPoint {
    pub y: Vec<f64>,
    pub norm_sq: f64,
    pub u: f64,
    pub du: Vec<f64>,
    pub d2u: Vec<Vec<f64>>,
    pub phi: f64,
    pub dphi: f64,
    pub d2phi: f64,
}

impl TestFunctionFC {
    pub fn new(u: PolySquash, directions: Vec<StepFunction>, cutoff: Bump) -> Result<Self> {
        if u.vars() != directions.len() {
            return Err(Error::invalid("outer function arity must match direction count"));
        }
        Ok(TestFunctionFC { u, directions, cutoff })
    }

    pub fn eval(&self, g: &StepFunction) -> f64 {
        let y: Vec<f64> = self.directions.iter().map(|h| g.inner(h)).collect();
        self.u.eval(&y) * self.cutoff.eval(g.norm2_sq())
    }

    pub fn at(&self, g: &StepFunction) -> FcPoint {
        let y: Vec<f64> = self.directions.iter().map(|h| g.inner(h)).collect();
        let norm_sq = g.norm2_sq();
        let (u, du, d2u) = self.u.derivs(&y);
        FcPoint {
            y,
            norm_sq,
            u,
            du,
            d2u,
            phi: self.cutoff.eval(norm_sq),
            dphi: self.cutoff.d1(norm_sq),
            d2phi: self.cutoff.d2(norm_sq),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd1(f: impl Fn(f64) -> f64, x: f64, eps: f64) -> f64 {
        (f(x + eps) - f(x - eps)) / (2.0 * eps)
    }

    fn fd2(f: impl Fn(f64) -> f64, x: f64, eps: f64) -> f64 {
        (f(x + eps) - 2.0 * f(x) + f(x - eps)) / (eps * eps)
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        for &x in &[-0.8, -0.3, 0.0, 0.4, 0.75] {
            let (_, d1, d2) = bump_c2(x, 1.0);
            let f = |x| bump_c2(x, 1.0).0;
            assert!((d1 - fd1(f, x, 1e-6)).abs() < 1e-6, "x={x}");
            assert!((d2 - fd2(f, x, 1e-5)).abs() < 2e-5, "x={x}");
        }
        // zero and flat outside support
        assert_eq!(bump_c2(1.5, 1.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn scalar_families_match_finite_differences() {
        let fs = [
            ScalarC2::Linear { a: 2.0, b: -1.0 },
            ScalarC2::Quadratic { a: 0.7 },
            ScalarC2::Sin { freq: 1.3, phase: 0.4 },
            ScalarC2::SinBump { freq: 2.0, phase: 0.1, radius: 3.0 },
        ];
        for f in &fs {
            for &x in &[-1.2, -0.1, 0.6, 2.0] {
                assert!((f.d1(x) - fd1(|t| f.eval(t), x, 1e-6)).abs() < 1e-6);
                assert!((f.d2(x) - fd2(|t| f.eval(t), x, 1e-5)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn poly_squash_derivatives_match_finite_differences() {
        // u = 2 s1^3 s2 - s2^2 + 0.5 s1
        let u = PolySquash::new(
            2,
            vec![(2.0, vec![3, 1]), (-1.0, vec![0, 2]), (0.5, vec![1, 0])],
        )
        .unwrap();
        let y = [0.3, -0.7];
        let (val, grad, hess) = u.derivs(&y);
        assert!((val - u.eval(&y)).abs() < 1e-14);
        let eps = 1e-6;
        for j in 0..2 {
            let f = |t: f64| {
                let mut yy = y;
                yy[j] = t;
                u.eval(&yy)
            };
            assert!((grad[j] - fd1(f, y[j], eps)).abs() < 1e-8);
            assert!((hess[j][j] - fd2(f, y[j], 1e-4)).abs() < 1e-6);
        }
        // mixed partial
        let f = |a: f64, b: f64| u.eval(&[a, b]);
        let e = 1e-4;
        let mixed = (f(y[0] + e, y[1] + e) - f(y[0] + e, y[1] - e) - f(y[0] - e, y[1] + e)
            + f(y[0] - e, y[1] - e))
            / (4.0 * e * e);
        assert!((hess[0][1] - mixed).abs() < 1e-6);
        assert!((hess[0][1] - hess[1][0]).abs() < 1e-14);
    }

    #[test]
    fn cylinder_function_evaluates() {
        let h = StepFunction::new(vec![0.5], vec![0.0, 1.0]).unwrap();
        let u = PolySquash::new(1, vec![(1.0, vec![1])]).unwrap();
        let fc = TestFunctionFC::new(u, vec![h], Bump { radius: 4.0 }).unwrap();
        let g = StepFunction::constant(0.5);
        // <g,h> = 0.25, |g|^2 = 0.25
        let expect = 0.25f64.tanh() * bump_c2(0.25, 4.0).0;
        assert!((fc.eval(&g) - expect).abs() < 1e-14);
        // outside the cutoff support the function vanishes
        let far = StepFunction::constant(10.0);
        assert_eq!(fc.eval(&far), 0.0);
    }
}
