use serde::{Deserialize, Serialize};

use super::{recover_mixture_scalar, TraceEntry, TracedOracle};
use crate::cost::{
    Bounds, Component, DualVector, LagrangianOracle, MixedSolution, PureCandidate,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalarDualConfig {
    /// Largest multiplier tried while bracketing.
    pub lambda_max: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub tol_lambda: f64,
    /// Bisection also stops once an endpoint risk is this close to the bound.
    pub tol_risk: f64,
    pub max_iter: usize,
    /// Allowed increase of `c1` with `λ` before the oracle is declared
    /// non-monotone.
    pub monotone_tol: f64,
}

impl Default for ScalarDualConfig {
    fn default() -> Self {
        Self {
            lambda_max: 1e9,
            tol_lambda: 1e-6,
            tol_risk: 1e-9,
            max_iter: 200,
            monotone_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalarDualResult<P> {
    pub lambda_star: f64,
    /// Bracket endpoint at the low multiplier; its risk is at least `V`.
    pub lower: PureCandidate<P>,
    pub lambda_lower: f64,
    /// Bracket endpoint at the high multiplier; its risk is at most `V`.
    pub upper: PureCandidate<P>,
    pub lambda_upper: f64,
    pub q_star: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

/// Root finding on `λ ↦ c1(λ) − V` for single-constraint problems.
///
/// Returns `λ* = 0` with `lower = upper` when the unconstrained minimizer
/// already satisfies the bound. Otherwise the root is bracketed by doubling
/// from `λ = 1` and then bisected.
pub fn solve_dual_scalar<O: LagrangianOracle>(
    oracle: &O,
    v: &Bounds,
    config: &ScalarDualConfig,
) -> Result<ScalarDualResult<O::Policy>> {
    if oracle.k_constraints() != 1 || v.k() != 1 {
        return Err(Error::InvalidInput(
            "scalar dual solver needs exactly one constraint".into(),
        ));
    }
    if !(config.lambda_max > 0.0) {
        return Err(Error::InvalidInput("lambda_max must be positive".into()));
    }
    let bound = v.v[0];
    let mut traced = TracedOracle::new(oracle, v);

    let (at_zero, value_zero) = traced.query(&DualVector::scalar(0.0))?;
    if at_zero.cost.c1() <= bound {
        return Ok(ScalarDualResult {
            lambda_star: 0.0,
            lower: at_zero.clone(),
            lambda_lower: 0.0,
            upper: at_zero,
            lambda_upper: 0.0,
            q_star: value_zero,
            iterations: 0,
            converged: true,
            trace: traced.trace,
        });
    }

    let monotone = |lo: f64, c_lo: f64, hi: f64, c_hi: f64| {
        if c_hi > c_lo + config.monotone_tol {
            Err(Error::NonMonotoneOracle {
                lambda_low: lo,
                lambda_high: hi,
                risk_low: c_lo,
                risk_high: c_hi,
            })
        } else {
            Ok(())
        }
    };

    // Bracket: c1(lo) > V >= c1(hi).
    let (mut lo, mut lo_cand) = (0.0, at_zero);
    let mut hi = 1.0f64.min(config.lambda_max);
    let mut hi_cand = loop {
        let (cand, _) = traced.query(&DualVector::scalar(hi))?;
        monotone(lo, lo_cand.cost.c1(), hi, cand.cost.c1())?;
        if cand.cost.c1() <= bound {
            break cand;
        }
        if hi >= config.lambda_max {
            return Err(Error::Infeasible(format!(
                "risk {} at lambda_max = {} still exceeds the bound {bound}",
                cand.cost.c1(),
                config.lambda_max
            )));
        }
        lo = hi;
        lo_cand = cand;
        hi = (2.0 * hi).min(config.lambda_max);
    };

    let mut iterations = 0;
    let close = |c: &PureCandidate<O::Policy>| (c.cost.c1() - bound).abs() <= config.tol_risk;
    while hi - lo > config.tol_lambda
        && iterations < config.max_iter
        && !close(&lo_cand)
        && !close(&hi_cand)
    {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let (cand, _) = traced.query(&DualVector::scalar(mid))?;
        monotone(lo, lo_cand.cost.c1(), mid, cand.cost.c1())?;
        monotone(mid, cand.cost.c1(), hi, hi_cand.cost.c1())?;
        if cand.cost.c1() > bound {
            lo = mid;
            lo_cand = cand;
        } else {
            hi = mid;
            hi_cand = cand;
        }
    }
    let converged = hi - lo <= config.tol_lambda || close(&lo_cand) || close(&hi_cand);

    let lambda_star = 0.5 * (lo + hi);
    let (_, q_star) = traced.query(&DualVector::scalar(lambda_star))?;
    Ok(ScalarDualResult {
        lambda_star,
        lower: lo_cand,
        lambda_lower: lo,
        upper: hi_cand,
        lambda_upper: hi,
        q_star,
        iterations,
        converged,
        trace: traced.trace,
    })
}

/// Scalar dual solve followed by mixture recovery.
pub fn solve_mixed_scalar<O: LagrangianOracle>(
    oracle: &O,
    v: &Bounds,
    config: &ScalarDualConfig,
) -> Result<(ScalarDualResult<O::Policy>, MixedSolution<O::Policy>)> {
    let res = solve_dual_scalar(oracle, v, config)?;
    let mut mixed = if res.lambda_star == 0.0 {
        MixedSolution::new(
            vec![Component { candidate: res.lower.clone(), probability: 1.0 }],
            DualVector::scalar(0.0),
            0.0,
        )?
    } else {
        recover_mixture_scalar(&res.lower, &res.upper, v)?
    };
    mixed.dual = DualVector::scalar(res.lambda_star);
    mixed.gap_estimate = (mixed.aggregate.c0 - res.q_star).max(0.0);
    Ok((res, mixed))
}
