//! Piecewise-constant functions on `[0,1]` in canonical form.
//!
//! A [`StepFunction`] is right-continuous, takes value `values[i]` on
//! `[breaks[i-1], breaks[i])` (with the conventions `breaks[-1] = 0`,
//! `breaks[n-1] = 1`), and `f(1) = values[n-1]`. The canonical form has no
//! two adjacent cells with exactly equal values, so the representation of a
//! given function is unique.
//!
//! Monotone step functions are the system's states: a step function with
//! strictly increasing values is the quantile function of a finitely-atomic
//! probability measure. Non-monotone step functions appear as gradients and
//! test directions; the same type carries both, and [`StepFunction::new`]
//! enforces monotonicity while [`StepFunction::piecewise`] does not.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    /// Strictly increasing interior breakpoints in (0,1); empty for constants.
    breaks: Vec<f64>,
    /// Cell values; `values.len() == breaks.len() + 1`.
    values: Vec<f64>,
}

fn validate_breaks(breaks: &[f64], values: &[f64]) -> Result<()> {
    if values.len() != breaks.len() + 1 {
        return Err(Error::invalid(format!(
            "need one more value than breakpoints, got {} values / {} breakpoints",
            values.len(),
            breaks.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value"));
    }
    for (i, &q) in breaks.iter().enumerate() {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::invalid(format!("breakpoint {q} outside (0,1)")));
        }
        if i > 0 && q <= breaks[i - 1] {
            return Err(Error::invalid("breakpoints not strictly increasing"));
        }
    }
    Ok(())
}

impl StepFunction {
    /// Canonical monotone step function. Adjacent cells with exactly equal
    /// values are merged (their breakpoint removed); strictly decreasing
    /// values are rejected.
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_breaks(&breaks, &values)?;
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("values must be non-decreasing"));
        }
        Ok(Self::canonicalize(breaks, values))
    }

    /// General (not necessarily monotone) step function in canonical form.
    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_breaks(&breaks, &values)?;
        Ok(Self::canonicalize(breaks, values))
    }

    pub fn constant(c: f64) -> Self {
        StepFunction { breaks: vec![], values: vec![c] }
    }

    fn canonicalize(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        let mut q = Vec::with_capacity(breaks.len());
        let mut x = Vec::with_capacity(values.len());
        x.push(values[0]);
        for (i, &b) in breaks.iter().enumerate() {
            let v = values[i + 1];
            if v != *x.last().unwrap() {
                q.push(b);
                x.push(v);
            }
        }
        StepFunction { breaks: q, values: x }
    }

    /// Discretize `f` onto `k` uniform cells (midpoint values), then canonicalize.
    pub fn from_grid_fn(f: impl Fn(f64) -> f64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        let breaks: Vec<f64> = (1..k).map(|i| i as f64 / k as f64).collect();
        let values: Vec<f64> = (0..k)
            .map(|i| f((i as f64 + 0.5) / k as f64))
            .collect();
        Self::piecewise(breaks, values)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of distinct values (atoms of the induced measure).
    pub fn num_values(&self) -> usize {
        self.values.len()
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    /// Right-continuous evaluation; `eval(1)` returns the last value.
    pub fn eval(&self, u: f64) -> f64 {
        // number of breakpoints <= u gives the cell index
        let idx = self.breaks.partition_point(|&q| q <= u);
        self.values[idx]
    }

    /// Iterate over cells as (lo, hi, value).
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.values.len()).map(move |i| {
            let lo = if i == 0 { 0.0 } else { self.breaks[i - 1] };
            let hi = if i == self.values.len() - 1 { 1.0 } else { self.breaks[i] };
            (lo, hi, self.values[i])
        })
    }

    /// Visit the common refinement of two step functions.
    pub fn sweep2(a: &Self, b: &Self, mut visit: impl FnMut(f64, f64, f64, f64)) {
        let mut lo = 0.0;
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let a_end = a.breaks.get(i).copied().unwrap_or(1.0);
            let b_end = b.breaks.get(j).copied().unwrap_or(1.0);
            let hi = a_end.min(b_end);
            visit(lo, hi, a.values[i], b.values[j]);
            if hi >= 1.0 {
                break;
            }
            if a_end == hi {
                i += 1;
            }
            if b_end == hi {
                j += 1;
            }
            lo = hi;
        }
    }

    /// Exact L2[0,1] inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        Self::sweep2(self, other, |lo, hi, a, b| acc += (hi - lo) * a * b);
        acc
    }

    pub fn norm2_sq(&self) -> f64 {
        self.inner(self)
    }

    /// Exact p-norm for p >= 1.
    pub fn norm_p(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, v) in self.cells() {
            acc += (hi - lo) * v.abs().powf(p);
        }
        acc.powf(1.0 / p)
    }

    pub fn dist2_sq(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        Self::sweep2(self, other, |lo, hi, a, b| acc += (hi - lo) * (a - b) * (a - b));
        acc
    }

    /// Exact integral of the function over `[a,b)`.
    pub fn integral_on(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, v) in self.cells() {
            let l = lo.max(a);
            let h = hi.min(b);
            if h > l {
                acc += (h - l) * v;
            }
        }
        acc
    }

    /// Linear combination of step functions (exact, on the common refinement).
    pub fn linear_comb(terms: &[(f64, &StepFunction)]) -> StepFunction {
        if terms.is_empty() {
            return StepFunction::constant(0.0);
        }
        let mut breaks: Vec<f64> = terms
            .iter()
            .flat_map(|(_, f)| f.breaks.iter().copied())
            .collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let values: Vec<f64> = (0..=breaks.len())
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { breaks[i - 1] };
                let hi = if i == breaks.len() { 1.0 } else { breaks[i] };
                let mid = 0.5 * (lo + hi);
                terms.iter().map(|(c, f)| c * f.eval(mid)).sum()
            })
            .collect();
        Self::canonicalize(breaks, values)
    }

    pub fn scale(&self, c: f64) -> StepFunction {
        StepFunction::linear_comb(&[(c, self)])
    }

    /// Conditional expectation of `self` given the level sets of `g`:
    /// on each constancy cell of `g` the result is the average of `self`.
    pub fn conditional_on(&self, g: &StepFunction) -> StepFunction {
        let values: Vec<f64> = g
            .cells()
            .map(|(lo, hi, _)| self.integral_on(lo, hi) / (hi - lo))
            .collect();
        Self::canonicalize(g.breaks.clone(), values)
    }

    /// True iff `self` is measurable with respect to the sigma-algebra of
    /// level sets of the monotone function `f`: wherever `f` is flat, `self`
    /// must be constant. Equivalently, every jump of `self` sits at a point
    /// where `f` strictly increases from the left.
    pub fn is_measurable_wrt(&self, f: &MonotoneFn) -> bool {
        self.breaks.iter().all(|&s| f.strictly_increases_left_of(s))
    }
}

/// A bounded non-decreasing function on `[0,1]`, either a step function
/// (atomic increments) or a continuous tabulated grid function (piecewise
/// linear between grid nodes).
#[derive(Debug, Clone)]
pub enum MonotoneFn {
    Step(StepFunction),
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl MonotoneFn {
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::invalid("tabulated function needs matching grid/values, len >= 2"));
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
            return Err(Error::invalid("tabulated grid must span [0,1]"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tabulated grid not strictly increasing"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("tabulated values must be non-decreasing"));
        }
        Ok(MonotoneFn::Tabulated { grid, values })
    }

    pub fn step(f: StepFunction) -> Result<Self> {
        if f.values().windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("step function must be non-decreasing"));
        }
        Ok(MonotoneFn::Step(f))
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            MonotoneFn::Step(f) => f.eval(u),
            MonotoneFn::Tabulated { grid, values } => {
                if u <= 0.0 {
                    return values[0];
                }
                if u >= 1.0 {
                    return *values.last().unwrap();
                }
                let j = grid.partition_point(|&x| x <= u) - 1;
                let t = (u - grid[j]) / (grid[j + 1] - grid[j]);
                values[j] + t * (values[j + 1] - values[j])
            }
        }
    }

    /// Total increase over [0,1].
    pub fn span(&self) -> f64 {
        self.eval(1.0) - self.eval(0.0)
    }

    /// True iff `f(a) < f(s)` for every `a < s`, i.e. `f` is not flat on any
    /// left neighborhood of `s`. A step function of the system may jump at
    /// `s` without breaking measurability exactly in this case.
    pub fn strictly_increases_left_of(&self, s: f64) -> bool {
        match self {
            MonotoneFn::Step(f) => {
                // must be an exact jump location with a positive jump
                match f.breaks().binary_search_by(|q| q.partial_cmp(&s).unwrap()) {
                    Ok(k) => f.values()[k + 1] > f.values()[k],
                    Err(_) => false,
                }
            }
            MonotoneFn::Tabulated { grid, values } => {
                // cell immediately left of s must have positive slope
                let j = grid.partition_point(|&x| x < s);
                if j == 0 {
                    return true; // s <= 0: nothing to the left
                }
                values[j] > values[j - 1]
            }
        }
    }
}
