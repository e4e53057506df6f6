use rayon::prelude::*;

use super::model::{EvalResult, Mdp, Policy, NO_ACTION};
use crate::cost::{Bounds, CostVector, DualVector, LagrangianOracle, PureCandidate};
use crate::error::{Error, Result};

/// Layers at least this large are swept in parallel.
const PAR_MIN: usize = 2048;

/// Result of one backward induction.
#[derive(Debug, Clone)]
pub struct DpSolution {
    pub policy: Policy,
    /// Value of the penalized problem under the initial distribution,
    /// including `λ` times the initial failure mass.
    pub value: f64,
    pub eval: EvalResult,
}

/// Backward induction for `c0 + λ c1` with first-passage failure.
///
/// Entering a failure state costs `λ` once and ends the trajectory. Ties
/// between actions go to the lowest index.
pub fn solve_penalized(mdp: &Mdp, lambda: f64) -> Result<DpSolution> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("multiplier {lambda} must be finite and >= 0")));
    }
    let t = mdp.horizon();
    let mut actions = vec![Vec::new(); t];
    let mut j_next = mdp.terminal_cost().to_vec();
    for k in (0..t).rev() {
        let stage = mdp.stage(k);
        let fail_next = mdp.failure_layer(k + 1);
        let w = |x: usize| if fail_next[x] { lambda } else { j_next[x] };
        let expect = |o: usize| stage.outcome(o).map(|(x, p)| p * w(x)).sum::<f64>();
        let outcome_value: Vec<f64> = if stage.n_outcomes() >= PAR_MIN {
            (0..stage.n_outcomes()).into_par_iter().map(expect).collect()
        } else {
            (0..stage.n_outcomes()).map(expect).collect()
        };
        let fail_here = mdp.failure_layer(k);
        let best = |x: usize| -> (u32, f64) {
            if fail_here[x] {
                return (NO_ACTION, 0.0);
            }
            let mut best = (0u32, f64::INFINITY);
            for a in 0..stage.n_actions(x) {
                let q = stage.cost(x, a) + outcome_value[stage.outcome_of(x, a)];
                if q < best.1 {
                    best = (a as u32, q);
                }
            }
            best
        };
        let layer: Vec<(u32, f64)> = if stage.n_states() >= PAR_MIN {
            (0..stage.n_states()).into_par_iter().map(best).collect()
        } else {
            (0..stage.n_states()).map(best).collect()
        };
        actions[k] = layer.iter().map(|b| b.0).collect();
        j_next = layer.into_iter().map(|b| b.1).collect();
    }
    let value = mdp
        .initial()
        .iter()
        .enumerate()
        .map(|(x, &p)| p * if mdp.is_failure(0, x) { lambda } else { j_next[x] })
        .sum();
    let policy = Policy { actions };
    let eval = evaluate_policy(mdp, &policy)?;
    Ok(DpSolution { policy, value, eval })
}

/// Lagrangian oracle step for a single chance constraint. The bound only
/// shifts the Lagrangian by a constant, so it does not enter here.
pub fn lagrangian_dp(mdp: &Mdp, lambda: f64) -> Result<PureCandidate<Policy>> {
    let sol = solve_penalized(mdp, lambda)?;
    Ok(PureCandidate::new(
        sol.policy,
        CostVector::new(sol.eval.expected_cost, vec![sol.eval.failure_prob])?,
    ))
}

/// Exact forward evaluation.
pub fn evaluate_policy(mdp: &Mdp, policy: &Policy) -> Result<EvalResult> {
    evaluate_policy_with_mass(mdp, policy).map(|(r, _)| r)
}

/// Like [`evaluate_policy`], also returning `(alive, failed)` mass at every
/// layer.
pub fn evaluate_policy_with_mass(
    mdp: &Mdp,
    policy: &Policy,
) -> Result<(EvalResult, Vec<(f64, f64)>)> {
    let t = mdp.horizon();
    if policy.actions.len() != t {
        return Err(Error::InvalidPolicy(format!(
            "policy covers {} layers, model has {t}",
            policy.actions.len()
        )));
    }
    let mut failed = 0.0;
    let mut mass: Vec<f64> = mdp
        .initial()
        .iter()
        .enumerate()
        .map(|(x, &p)| {
            if mdp.is_failure(0, x) {
                failed += p;
                0.0
            } else {
                p
            }
        })
        .collect();
    let mut profile = vec![(mass.iter().sum(), failed)];
    let mut cost = 0.0;
    for k in 0..t {
        let stage = mdp.stage(k);
        let fail_next = mdp.failure_layer(k + 1);
        if policy.actions[k].len() != stage.n_states() {
            return Err(Error::InvalidPolicy(format!("layer {k} has the wrong number of states")));
        }
        let mut next = vec![0.0; stage.n_next()];
        for (x, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let a = policy.action(k, x).filter(|&a| a < stage.n_actions(x)).ok_or_else(|| {
                Error::InvalidPolicy(format!("no admissible action at layer {k}, state {x}"))
            })?;
            cost += m * stage.cost(x, a);
            for (y, p) in stage.outcome(stage.outcome_of(x, a)) {
                if fail_next[y] {
                    failed += m * p;
                } else {
                    next[y] += m * p;
                }
            }
        }
        mass = next;
        profile.push((mass.iter().sum(), failed));
    }
    cost += mass.iter().zip(mdp.terminal_cost()).map(|(m, c)| m * c).sum::<f64>();
    Ok((
        EvalResult { expected_cost: cost, failure_prob: failed.clamp(0.0, 1.0) },
        profile,
    ))
}

/// [`LagrangianOracle`] over deterministic policies of an [`Mdp`] with one
/// chance constraint.
#[derive(Debug, Clone)]
pub struct MdpOracle<'a> {
    pub mdp: &'a Mdp,
    pub bounds: Bounds,
}

impl<'a> MdpOracle<'a> {
    pub fn new(mdp: &'a Mdp, v: f64) -> Self {
        Self { mdp, bounds: Bounds::scalar(v) }
    }
}

impl LagrangianOracle for MdpOracle<'_> {
    type Policy = Policy;

    fn k_constraints(&self) -> usize {
        1
    }

    fn query(&self, lambda: &DualVector) -> Result<PureCandidate<Policy>> {
        if lambda.k() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: lambda.k() });
        }
        lagrangian_dp(self.mdp, lambda.lambda[0])
    }

    fn evaluate(&self, policy: &Policy) -> Result<CostVector> {
        let r = evaluate_policy(self.mdp, policy)?;
        CostVector::new(r.expected_cost, vec![r.failure_prob])
    }
}
