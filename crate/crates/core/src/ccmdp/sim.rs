use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::model::{Mdp, Policy};
use crate::cost::MixedSolution;
use crate::error::{Error, Result};

/// Two-sided confidence level of reported intervals.
pub const CI_LEVEL: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n_rollouts: usize,
    pub empirical_cost_mean: f64,
    pub empirical_failure_rate: f64,
    /// Wilson interval on the failure rate at [`CI_LEVEL`].
    pub ci: (f64, f64),
}

/// Wilson score interval for `failures` out of `n` at [`CI_LEVEL`].
pub fn wilson_interval(failures: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::standard().inverse_cdf(0.5 + CI_LEVEL / 2.0);
    let n = n as f64;
    let p = failures as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Draws an index from cumulative weights.
pub(crate) fn pick(u: f64, weights: impl Iterator<Item = f64>) -> Option<usize> {
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last
}

/// Monte Carlo rollouts of a mixed policy.
///
/// Each rollout draws its component once from the mixture probabilities and
/// then follows that policy. Rollout `i` uses its own ChaCha stream derived
/// from `seed`, so results do not depend on the thread count.
pub fn simulate(
    mdp: &Mdp,
    solution: &MixedSolution<Policy>,
    seed: u64,
    n_rollouts: usize,
) -> Result<SimResult> {
    if n_rollouts == 0 {
        return Err(Error::InvalidInput("need at least one rollout".into()));
    }
    let probs = solution.probabilities();
    let outcomes: Vec<(f64, bool)> = (0..n_rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let c = pick(rng.random(), probs.iter().copied()).unwrap_or(0);
            rollout(mdp, &solution.components[c].candidate.policy, &mut rng)
        })
        .collect::<Result<_>>()?;
    let cost: f64 = outcomes.iter().map(|o| o.0).sum();
    let failures = outcomes.iter().filter(|o| o.1).count();
    Ok(SimResult {
        n_rollouts,
        empirical_cost_mean: cost / n_rollouts as f64,
        empirical_failure_rate: failures as f64 / n_rollouts as f64,
        ci: wilson_interval(failures, n_rollouts),
    })
}

fn rollout(mdp: &Mdp, policy: &Policy, rng: &mut ChaCha8Rng) -> Result<(f64, bool)> {
    let mut x = pick(rng.random(), mdp.initial().iter().copied()).unwrap_or(0);
    if mdp.is_failure(0, x) {
        return Ok((0.0, true));
    }
    let mut cost = 0.0;
    for k in 0..mdp.horizon() {
        let stage = mdp.stage(k);
        let a = policy.action(k, x).filter(|&a| a < stage.n_actions(x)).ok_or_else(|| {
            Error::InvalidPolicy(format!("no admissible action at layer {k}, state {x}"))
        })?;
        cost += stage.cost(x, a);
        let o = stage.outcome_of(x, a);
        let j = pick(rng.random(), stage.outcome(o).map(|(_, p)| p)).unwrap_or(0);
        x = stage.outcome(o).nth(j).map(|(y, _)| y).unwrap_or(0);
        if mdp.is_failure(k + 1, x) {
            return Ok((cost, true));
        }
    }
    Ok((cost + mdp.terminal_cost()[x], false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccmdp::dp::tests::two_state_chain;
    use crate::ccmdp::dp::{evaluate_policy, lagrangian_dp};
    use crate::cost::{mix_costs, Component, DualVector};

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(50, 1000);
        // Reference from the closed form with z = 2.5758293035489.
        assert!((lo - 0.0350251).abs() < 1e-6, "{lo}");
        assert!((hi - 0.0709070).abs() < 1e-6, "{hi}");
        assert_eq!(wilson_interval(0, 10).0, 0.0);
    }

    #[test]
    fn pick_follows_weights() {
        assert_eq!(pick(0.0, [0.0, 0.5, 0.5].into_iter()), Some(1));
        assert_eq!(pick(0.75, [0.0, 0.5, 0.5].into_iter()), Some(2));
        assert_eq!(pick(0.9999999999, [0.5, 0.4999999].into_iter()), Some(1));
    }

    fn chain_mixture() -> (crate::ccmdp::Mdp, MixedSolution<Policy>) {
        let m = two_state_chain();
        let risky = lagrangian_dp(&m, 1.0).unwrap();
        let safe = lagrangian_dp(&m, 10.0).unwrap();
        let sol = MixedSolution::new(
            vec![
                Component { candidate: risky, probability: 0.3 },
                Component { candidate: safe, probability: 0.7 },
            ],
            DualVector::scalar(4.0),
            0.0,
        )
        .unwrap();
        (m, sol)
    }

    #[test]
    fn chain_mixture_failure_rate_within_ci() {
        let (m, sol) = chain_mixture();
        let exact = mix_costs(
            &sol.components
                .iter()
                .map(|c| (&c.candidate.cost, c.probability))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((exact.c1() - 0.15).abs() < 1e-12);
        let r = simulate(&m, &sol, 7, 100_000).unwrap();
        assert!(r.ci.0 <= exact.c1() && exact.c1() <= r.ci.1, "{r:?}");
        assert!((r.empirical_cost_mean - exact.c0).abs() < 0.02);
    }

    #[test]
    fn deterministic_single_component_is_exact() {
        let (m, sol) = chain_mixture();
        let safe = sol.components[1].candidate.clone();
        let single = MixedSolution::new(
            vec![Component { candidate: safe.clone(), probability: 1.0 }],
            DualVector::scalar(0.0),
            0.0,
        )
        .unwrap();
        let r = simulate(&m, &single, 1, 500).unwrap();
        let e = evaluate_policy(&m, &safe.policy).unwrap();
        assert_eq!(r.empirical_cost_mean, e.expected_cost);
        assert_eq!(r.empirical_failure_rate, 0.0);
    }

    #[test]
    fn same_seed_same_result() {
        let (m, sol) = chain_mixture();
        assert_eq!(simulate(&m, &sol, 3, 2000).unwrap(), simulate(&m, &sol, 3, 2000).unwrap());
    }
}
