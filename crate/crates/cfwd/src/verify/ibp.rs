//! Monte-Carlo check of the integration-by-parts identity for the invariant
//! measure.
//!
//! For cylinder functions `U, V` supported in the ball `B_r`, summing the
//! per-stratum identities up to stratum `n` gives exactly
//!
//! ```text
//! int <grad U, grad V> dXi_{<=n}
//!   + int (L0 U) V dXi_{<=n}
//!   + int phi_U * sum_j du_j <h_j, xi - E[xi|g]> * V dXi_{<=n-1}  =  0
//! ```
//!
//! — note the defect (third) term integrates over the strata up to `n-1`:
//! the per-stratum identity couples stratum `k` with stratum `k-1`. When `n`
//! equals the number of driver values the defect vanishes pointwise on the
//! top stratum anyway (the driver is then measurable with respect to `g`),
//! so the truncation is exact in both readings.
//!
//! Estimation is stratified: each stratum is integrated by the exact
//! rejection sampler of [`crate::xi::StratumSampler`], in deterministic
//! chunks so that results are independent of thread count.

use crate::diffops::{gradient, interaction_term, second_order};
use crate::error::{Error, Result};
use crate::seed::stream_rng;
use crate::stats::{pairwise_sum, StatReport};
use crate::step_fn::StepFunction;
use crate::testfn::{Bump, PolySquash, TestFunctionFC};
use crate::xi::{jump_driver, StratumSampler};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct IbpBankConfig {
    /// Atomic driver of the measure and the dynamics.
    pub driver: StepFunction,
    /// Sum strata 1..=max_stratum.
    pub max_stratum: u32,
    /// Ball radius; cutoff supports must fit inside.
    pub radius: f64,
    /// Proposals per stratum (shared by all pairs).
    pub proposals: u64,
    pub seed: u64,
    pub z_threshold: f64,
}

struct PerFnEval {
    grad: StepFunction,
    l0: f64,
    defect: f64,
    value: f64,
}

/// Stratified Monte-Carlo estimate of the identity defect for every listed
/// pair `(i, j)` of `funcs`, sharing proposals across pairs. One report per
/// pair, z-scored against zero.
pub fn check_ibp_bank(
    funcs: &[TestFunctionFC],
    pairs: &[(usize, usize)],
    cfg: &IbpBankConfig,
) -> Result<Vec<StatReport>> {
    for f in funcs {
        if f.cutoff.radius > cfg.radius * cfg.radius + 1e-12 {
            return Err(Error::invalid(
                "cutoff support exceeds the sampling ball; enlarge radius",
            ));
        }
    }
    let chunk: u64 = 1 << 14;
    let mut est = vec![0.0; pairs.len()];
    let mut var = vec![0.0; pairs.len()];
    let mut total_proposals = 0u64;
    for stratum in 1..=cfg.max_stratum {
        let sampler = match StratumSampler::build(&cfg.driver, stratum, cfg.radius) {
            Ok(s) => s,
            Err(_) => continue, // null stratum
        };
        let include_defect = stratum < cfg.max_stratum
            || cfg.driver.num_values() as u32 <= cfg.max_stratum;
        let n_chunks = cfg.proposals.div_ceil(chunk);
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream_rng(cfg.seed, (stratum as u64) << 32 | c);
                let this_chunk = chunk.min(cfg.proposals - c * chunk);
                let mut sums = vec![0.0; pairs.len()];
                let mut sqs = vec![0.0; pairs.len()];
                for _ in 0..this_chunk {
                    if let Some(g) = sampler.propose(&mut rng) {
                        let evals: Vec<PerFnEval> = funcs
                            .iter()
                            .map(|f| PerFnEval {
                                grad: gradient(f, &g),
                                l0: second_order(f, &g),
                                defect: if include_defect {
                                    interaction_term(f, &g, &cfg.driver)
                                } else {
                                    0.0
                                },
                                value: f.eval(&g),
                            })
                            .collect();
                        for (p, &(i, j)) in pairs.iter().enumerate() {
                            let v = evals[i].grad.inner(&evals[j].grad)
                                + evals[i].l0 * evals[j].value
                                + evals[i].defect * evals[j].value;
                            sums[p] += v;
                            sqs[p] += v * v;
                        }
                    }
                }
                (sums, sqs)
            })
            .collect();
        let n = cfg.proposals as f64;
        for p in 0..pairs.len() {
            let col: Vec<f64> = partials.iter().map(|(s, _)| s[p]).collect();
            let col_sq: Vec<f64> = partials.iter().map(|(_, s)| s[p]).collect();
            let mean = pairwise_sum(&col) / n;
            let v = (pairwise_sum(&col_sq) / n - mean * mean).max(0.0) / (n - 1.0);
            est[p] += sampler.box_total() * mean;
            var[p] += sampler.box_total() * sampler.box_total() * v;
        }
        total_proposals += cfg.proposals;
    }
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            StatReport::z_test(
                format!("ibp[U{i},V{j}]"),
                est[p],
                var[p].sqrt(),
                0.0,
                total_proposals,
                cfg.z_threshold,
            )
        })
        .collect())
}

/// Single-pair convenience wrapper.
pub fn check_ibp(
    u: &TestFunctionFC,
    v: &TestFunctionFC,
    cfg: &IbpBankConfig,
) -> Result<StatReport> {
    let funcs = vec![u.clone(), v.clone()];
    Ok(check_ibp_bank(&funcs, &[(0, 1)], cfg)?.remove(0))
}

/// The versioned default bank: a two-jump driver, directions measurable
/// with respect to it, and ten fixed function pairs.
pub fn default_ibp_bank() -> (StepFunction, Vec<TestFunctionFC>, Vec<(usize, usize)>) {
    let driver = jump_driver(0.0, &[(0.3, 0.6), (0.7, 0.4)]).expect("valid driver");
    let cut = |radius: f64| Bump { radius };
    let h_const = StepFunction::constant(1.0);
    let h_left = StepFunction::piecewise(vec![0.3], vec![1.0, 0.0]).unwrap();
    let h_right = StepFunction::piecewise(vec![0.7], vec![0.0, 1.0]).unwrap();
    let h_ramp = StepFunction::piecewise(vec![0.3, 0.7], vec![-1.0, 0.5, 2.0]).unwrap();
    let h_osc = StepFunction::piecewise(vec![0.3, 0.7], vec![1.0, -1.0, 1.0]).unwrap();

    let funcs = vec![
        // pure cutoff
        TestFunctionFC::new(PolySquash::one(0), vec![], cut(1.0)).unwrap(),
        // linear in one direction
        TestFunctionFC::new(
            PolySquash::new(1, vec![(1.0, vec![1])]).unwrap(),
            vec![h_ramp.clone()],
            cut(0.9),
        )
        .unwrap(),
        // cubic in one direction
        TestFunctionFC::new(
            PolySquash::new(1, vec![(0.7, vec![1]), (-0.4, vec![3])]).unwrap(),
            vec![h_osc.clone()],
            cut(1.0),
        )
        .unwrap(),
        // two directions, mixed quadratic
        TestFunctionFC::new(
            PolySquash::new(2, vec![(1.0, vec![1, 0]), (0.5, vec![1, 1]), (-0.3, vec![0, 2])])
                .unwrap(),
            vec![h_left.clone(), h_right.clone()],
            cut(0.8),
        )
        .unwrap(),
        // constant direction: the defect term vanishes identically
        TestFunctionFC::new(
            PolySquash::new(1, vec![(1.0, vec![2]), (0.2, vec![1])]).unwrap(),
            vec![h_const],
            cut(1.0),
        )
        .unwrap(),
        // two directions, degree three
        TestFunctionFC::new(
            PolySquash::new(
                2,
                vec![(0.6, vec![3, 0]), (-0.5, vec![1, 2]), (0.4, vec![0, 1])],
            )
            .unwrap(),
            vec![h_ramp, h_osc],
            cut(0.9),
        )
        .unwrap(),
    ];
    let pairs = vec![
        (0, 1),
        (1, 2),
        (2, 3),
        (3, 4),
        (4, 5),
        (0, 3),
        (1, 4),
        (2, 5),
        (0, 5),
        (5, 1),
    ];
    (driver, funcs, pairs)
}
