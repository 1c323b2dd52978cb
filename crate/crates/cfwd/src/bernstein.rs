//! Multivariate Bernstein polynomial approximation on `[0,1]^k`, and its
//! rescaled variant on `[-M,M]^k` pinned to vanish at the origin.
//!
//! `B_n(f; x) = sum_j f(j/n) prod_d C(n,j_d) x_d^{j_d} (1-x_d)^{n-j_d}`.
//! The basis values are computed with the stable de Casteljau recurrence
//! (no explicit binomials), and the derivative basis follows from
//! `d/dx B_{j,n} = n (B_{j-1,n-1} - B_{j,n-1})`.
//!
//! The pinned variant is
//! `P_n^M(f; x) = B_n(f_M; x/(2M) + 1/2) - B_n(f_M; 1/2)` with
//! `f_M(y) = f(2M y - M)`, which satisfies `P_n^M(f; 0) = 0` identically.

/// Bernstein basis values `B_{0,n}(x), …, B_{n,n}(x)`.
pub fn basis(n: usize, x: f64) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for m in 1..=n {
        for j in (1..=m).rev() {
            b[j] = x * b[j - 1] + (1.0 - x) * b[j];
        }
        b[0] *= 1.0 - x;
    }
    b
}

/// Derivatives of the basis: `d/dx B_{j,n}(x)` for `j = 0..n`.
pub fn basis_deriv(n: usize, x: f64) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    let lower = basis(n - 1, x);
    (0..=n)
        .map(|j| {
            let a = if j >= 1 { lower[j - 1] } else { 0.0 };
            let b = if j <= n - 1 { lower[j] } else { 0.0 };
            n as f64 * (a - b)
        })
        .collect()
}

/// Precomputed Bernstein approximation of a function on `[0,1]^k`.
pub struct BernsteinApprox {
    n: usize,
    k: usize,
    /// f evaluated on the lattice `(j_1/n, …, j_k/n)`, row-major.
    lattice: Vec<f64>,
}

impl BernsteinApprox {
    pub fn new(f: impl Fn(&[f64]) -> f64, k: usize, n: usize) -> Self {
        assert!(k >= 1 && n >= 1);
        let points = (n + 1).pow(k as u32);
        let mut lattice = Vec::with_capacity(points);
        let mut idx = vec![0usize; k];
        let mut arg = vec![0.0; k];
        for _ in 0..points {
            for d in 0..k {
                arg[d] = idx[d] as f64 / n as f64;
            }
            lattice.push(f(&arg));
            for d in (0..k).rev() {
                idx[d] += 1;
                if idx[d] <= n {
                    break;
                }
                idx[d] = 0;
            }
        }
        BernsteinApprox { n, k, lattice }
    }

    fn contract(&self, per_dim: &[Vec<f64>]) -> f64 {
        let n1 = self.n + 1;
        let mut acc = 0.0;
        let mut idx = vec![0usize; self.k];
        for &fv in &self.lattice {
            let mut w = fv;
            for d in 0..self.k {
                w *= per_dim[d][idx[d]];
            }
            acc += w;
            for d in (0..self.k).rev() {
                idx[d] += 1;
                if idx[d] < n1 {
                    break;
                }
                idx[d] = 0;
            }
        }
        acc
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.k);
        let per_dim: Vec<Vec<f64>> = x.iter().map(|&xi| basis(self.n, xi)).collect();
        self.contract(&per_dim)
    }

    /// Partial derivative in direction `dim`.
    pub fn partial(&self, x: &[f64], dim: usize) -> f64 {
        assert_eq!(x.len(), self.k);
        let per_dim: Vec<Vec<f64>> = x
            .iter()
            .enumerate()
            .map(|(d, &xi)| {
                if d == dim {
                    basis_deriv(self.n, xi)
                } else {
                    basis(self.n, xi)
                }
            })
            .collect();
        self.contract(&per_dim)
    }
}

/// Rescaled Bernstein approximation on `[-M,M]^k`, pinned so that the
/// approximation of any function vanishes at the origin.
pub struct PinnedBernstein {
    inner: BernsteinApprox,
    m: f64,
    k: usize,
    center: f64,
}

impl PinnedBernstein {
    pub fn new(f: impl Fn(&[f64]) -> f64, k: usize, n: usize, m: f64) -> Self {
        assert!(m > 0.0);
        let inner = BernsteinApprox::new(
            |y: &[f64]| {
                let arg: Vec<f64> = y.iter().map(|&v| 2.0 * m * v - m).collect();
                f(&arg)
            },
            k,
            n,
        );
        let center = inner.eval(&vec![0.5; k]);
        PinnedBernstein { inner, m, k, center }
    }

    fn map(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| v / (2.0 * self.m) + 0.5).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.k);
        self.inner.eval(&self.map(x)) - self.center
    }

    pub fn partial(&self, x: &[f64], dim: usize) -> f64 {
        self.inner.partial(&self.map(x), dim) / (2.0 * self.m)
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub sup_error: f64,
    pub sup_grad_error: f64,
}

/// Sup-errors of the pinned approximation and its gradient against `f` and
/// `grad_f` on a uniform grid over `[-M,M]^k`, for each degree in `n_list`.
pub fn convergence_report(
    f: impl Fn(&[f64]) -> f64 + Copy,
    grad_f: impl Fn(&[f64], usize) -> f64,
    k: usize,
    m: f64,
    n_list: &[usize],
    grid: usize,
) -> Vec<ConvergenceRow> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let p = PinnedBernstein::new(f, k, n, m);
        let mut sup = 0.0f64;
        let mut sup_grad = 0.0f64;
        let points = grid.pow(k as u32);
        let mut idx = vec![0usize; k];
        let mut x = vec![0.0; k];
        for _ in 0..points {
            for d in 0..k {
                x[d] = -m + 2.0 * m * idx[d] as f64 / (grid - 1) as f64;
            }
            sup = sup.max((p.eval(&x) - f(&x)).abs());
            for d in 0..k {
                sup_grad = sup_grad.max((p.partial(&x, d) - grad_f(&x, d)).abs());
            }
            for d in (0..k).rev() {
                idx[d] += 1;
                if idx[d] < grid {
                    break;
                }
                idx[d] = 0;
            }
        }
        rows.push(ConvergenceRow { n, sup_error: sup, sup_grad_error: sup_grad });
    }
    rows
}
