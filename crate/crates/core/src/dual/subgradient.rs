use log::debug;
use serde::{Deserialize, Serialize};

use super::{recover_mixture_general, scale, TraceEntry, TracedOracle};
use crate::cost::{Bounds, DualVector, LagrangianOracle, MixedSolution, PureCandidate};
use crate::error::{Error, Result};
use crate::lpsolve::{solve_lp, Constraint, LpProblem, LpStatus, Relation, Sense};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SubgradientConfig {
    /// Initial step length. It doubles while successive directions agree.
    pub step0: f64,
    pub max_iter: usize,
    /// Relative duality gap at which the cutting-plane polish stops.
    pub tol: f64,
    pub lambda_max: f64,
    /// Refine the ascent iterate with cutting planes over the candidate pool.
    pub polish: bool,
    pub max_polish: usize,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        Self {
            step0: 1.0,
            max_iter: 100,
            tol: 1e-6,
            lambda_max: 1e9,
            polish: true,
            max_polish: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubgradientResult<P> {
    /// Best multiplier found.
    pub lambda: DualVector,
    /// Dual value at `lambda`.
    pub q: f64,
    /// Upper bound on the dual optimum from the cutting-plane model, or
    /// infinity when no polish ran.
    pub q_upper: f64,
    /// Distinct candidates returned by the oracle, in discovery order.
    pub pool: Vec<PureCandidate<P>>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

struct Search<'a, O: LagrangianOracle> {
    traced: TracedOracle<'a, O>,
    pool: Vec<PureCandidate<O::Policy>>,
    best: (DualVector, f64),
}

impl<O: LagrangianOracle> Search<'_, O> {
    /// Queries the oracle, keeps the candidate if its cost is new, and
    /// returns the candidate's index in the pool together with `q(λ)`.
    fn query(&mut self, lambda: &DualVector) -> Result<(usize, f64)> {
        let (cand, value) = self.traced.query(lambda)?;
        if value > self.best.1 {
            self.best = (lambda.clone(), value);
        }
        let idx = match self.pool.iter().position(|c| c.cost.same_bits(&cand.cost)) {
            Some(i) => i,
            None => {
                self.pool.push(cand);
                self.pool.len() - 1
            }
        };
        Ok((idx, value))
    }
}

/// Projected subgradient ascent on the dual, for any number of constraints.
///
/// Steps are normalized. The step length doubles while successive directions
/// agree and then decays like `1/√t`. With `polish` enabled, the iterate is
/// refined by a cutting-plane (Kelley) loop over the candidate pool, which
/// terminates once the model's upper bound is within `tol` of the best dual
/// value seen.
pub fn solve_dual_subgradient<O: LagrangianOracle>(
    oracle: &O,
    v: &Bounds,
    config: &SubgradientConfig,
) -> Result<SubgradientResult<O::Policy>> {
    let k = v.k();
    if oracle.k_constraints() != k {
        return Err(Error::DimensionMismatch { expected: k, found: oracle.k_constraints() });
    }
    if !(config.step0 > 0.0 && config.lambda_max > 0.0) {
        return Err(Error::InvalidInput("step0 and lambda_max must be positive".into()));
    }
    let mut s = Search {
        traced: TracedOracle::new(oracle, v),
        pool: Vec::new(),
        best: (DualVector::zeros(k), f64::NEG_INFINITY),
    };

    let mut lambda = DualVector::zeros(k);
    let (mut idx, _) = s.query(&lambda)?;
    if (0..k).all(|i| s.pool[idx].cost.c_rest[i] <= v.v[i]) {
        // The unconstrained minimizer is feasible, so λ = 0 is dual optimal.
        let q = s.best.1;
        return Ok(SubgradientResult {
            lambda,
            q,
            q_upper: q,
            pool: s.pool,
            iterations: 0,
            converged: true,
            trace: s.traced.trace,
        });
    }

    let mut step = config.step0;
    let mut expanding = true;
    let mut decay_start = 0;
    let mut prev_dir: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut stationary = false;
    for t in 1..=config.max_iter {
        iterations = t;
        let dir: Vec<f64> = (0..k)
            .map(|i| {
                let g = s.pool[idx].cost.c_rest[i] - v.v[i];
                if lambda.lambda[i] <= 0.0 && g < 0.0 {
                    0.0
                } else {
                    g
                }
            })
            .collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            stationary = true;
            break;
        }
        if expanding {
            if let Some(prev) = &prev_dir {
                if prev.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                    expanding = false;
                    decay_start = t - 1;
                } else {
                    step *= 2.0;
                }
            }
        }
        let alpha = if expanding { step } else { step / ((t - decay_start) as f64).sqrt() };
        lambda = DualVector {
            lambda: (0..k)
                .map(|i| (lambda.lambda[i] + alpha * dir[i] / norm).clamp(0.0, config.lambda_max))
                .collect(),
        };
        prev_dir = Some(dir);
        idx = s.query(&lambda)?.0;
    }

    let mut q_upper = f64::INFINITY;
    let mut converged = stationary;
    if config.polish && !stationary {
        for _ in 0..config.max_polish {
            let Some((lam, theta)) = cutting_plane_step(&s.pool, v, config.lambda_max)? else {
                break;
            };
            q_upper = q_upper.min(theta);
            let before = s.pool.len();
            s.query(&lam)?;
            if q_upper - s.best.1 <= config.tol * scale(q_upper) {
                converged = true;
                break;
            }
            if s.pool.len() == before {
                // No new cut: the model is exact at its maximizer.
                converged = true;
                break;
            }
        }
        debug!("cutting-plane polish: q = {}, upper = {q_upper}", s.best.1);
    }

    let (lambda, q) = s.best;
    Ok(SubgradientResult {
        lambda,
        q,
        q_upper,
        pool: s.pool,
        iterations,
        converged,
        trace: s.traced.trace,
    })
}

/// Maximizes the piecewise-linear model `min_j c0_j + λ·(c_j − V)` over the
/// box `[0, lambda_max]^K`.
fn cutting_plane_step<P>(
    pool: &[PureCandidate<P>],
    v: &Bounds,
    lambda_max: f64,
) -> Result<Option<(DualVector, f64)>> {
    let k = v.k();
    let mut obj = vec![0.0; k + 1];
    obj[k] = 1.0;
    let mut lp = LpProblem::new(Sense::Maximize, obj);
    for i in 0..k {
        lp.set_bounds(i, 0.0, lambda_max);
    }
    lp.set_bounds(k, f64::NEG_INFINITY, f64::INFINITY);
    for cand in pool {
        let mut coeffs: Vec<(usize, f64)> =
            (0..k).map(|i| (i, v.v[i] - cand.cost.c_rest[i])).collect();
        coeffs.push((k, 1.0));
        lp.add(Constraint::new(coeffs, Relation::Le, cand.cost.c0));
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let lambda = DualVector { lambda: sol.x[..k].iter().map(|l| l.clamp(0.0, lambda_max)).collect() };
    Ok(Some((lambda, sol.objective)))
}

/// Dual ascent followed by mixture recovery over the candidate pool.
///
/// If the pool admits no feasible mixture at the final multiplier, the
/// oracle is re-queried at small perturbations of it to collect the
/// neighbouring minimizers, with progressively larger perturbations.
pub fn solve_mixed_general<O: LagrangianOracle>(
    oracle: &O,
    v: &Bounds,
    config: &SubgradientConfig,
) -> Result<(SubgradientResult<O::Policy>, MixedSolution<O::Policy>)> {
    let mut res = solve_dual_subgradient(oracle, v, config)?;
    let mut last_err = match recover_mixture_general(&res.pool, &res.lambda, v, config.tol) {
        Ok(m) => return Ok((res, m)),
        Err(e @ Error::MixtureNotRecoverable { .. }) => e,
        Err(e) => return Err(e),
    };
    for eps in [1e-6, 1e-4, 1e-2] {
        for i in 0..v.k() {
            for sign in [-1.0, 1.0] {
                let mut lam = res.lambda.lambda.clone();
                lam[i] = (lam[i] + sign * eps * lam[i].max(1.0)).clamp(0.0, config.lambda_max);
                let lam = DualVector { lambda: lam };
                let cand = oracle.query(&lam)?;
                if !res.pool.iter().any(|c| c.cost.same_bits(&cand.cost)) {
                    res.pool.push(cand);
                }
            }
        }
        match recover_mixture_general(&res.pool, &res.lambda, v, config.tol.max(eps)) {
            Ok(m) => return Ok((res, m)),
            Err(e @ Error::MixtureNotRecoverable { .. }) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostVector;
    use crate::scenarios::FiniteSetOracle;

    fn oracle(points: &[(f64, &[f64])], v: &[f64]) -> FiniteSetOracle {
        FiniteSetOracle::new(
            points.iter().map(|&(a, c)| CostVector::new(a, c.to_vec()).unwrap()).collect(),
            Bounds::new(v.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn toy_reaches_one_thousand() {
        let o = oracle(&[(20.0, &[0.005]), (10.0, &[0.015])], &[0.01]);
        let r = solve_dual_subgradient(&o, &o.bounds, &SubgradientConfig::default()).unwrap();
        assert!(r.converged);
        assert!((r.lambda.lambda[0] - 1000.0).abs() < 1e-5);
        assert!((r.q - 15.0).abs() < 1e-9);
    }

    #[test]
    fn plain_ascent_without_polish_is_rough() {
        let o = oracle(&[(20.0, &[0.005]), (10.0, &[0.015])], &[0.01]);
        let cfg = SubgradientConfig { polish: false, ..Default::default() };
        let r = solve_dual_subgradient(&o, &o.bounds, &cfg).unwrap();
        assert_eq!(r.pool.len(), 2);
        assert!(r.q <= 15.0 + 1e-12);
    }

    #[test]
    fn two_constraint_example() {
        // All three lines meet at λ = (5, 2) with value 0.3; the optimal mix
        // is (0.5, 0.3, 0.2).
        let o = oracle(
            &[(0.0, &[0.2, 0.0]), (1.0, &[0.0, 0.0]), (0.0, &[0.0, 0.5])],
            &[0.1, 0.1],
        );
        let (r, m) = solve_mixed_general(&o, &o.bounds, &SubgradientConfig::default()).unwrap();
        assert!((r.q - 0.3).abs() < 1e-6, "q = {}", r.q);
        assert!((r.lambda.lambda[0] - 5.0).abs() < 1e-5);
        assert!((r.lambda.lambda[1] - 2.0).abs() < 1e-5);
        assert!((m.aggregate.c0 - 0.3).abs() < 1e-6);
        assert_eq!(m.components.len(), 3);
        assert!(m.aggregate.c_rest.iter().zip(&o.bounds.v).all(|(c, v)| *c <= v + 1e-9));
    }

    #[test]
    fn segment_of_optimal_multipliers() {
        // q* = 0.25 on λ1 − λ2 = 2.5, 0 ≤ λ2 ≤ 2.5; the third point is unused.
        let o = oracle(
            &[(0.0, &[0.2, 0.0]), (0.5, &[0.0, 0.2]), (1.0, &[0.0, 0.0])],
            &[0.1, 0.1],
        );
        let (r, m) = solve_mixed_general(&o, &o.bounds, &SubgradientConfig::default()).unwrap();
        let l = &r.lambda.lambda;
        assert!((r.q - 0.25).abs() < 1e-6);
        assert!((l[0] - l[1] - 2.5).abs() < 1e-5 && l[1] <= 2.5 + 1e-5);
        let mut p = vec![0.0; 3];
        for c in &m.components {
            p[c.candidate.policy] = c.probability;
        }
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9 && p[2] < 1e-9);
    }

    #[test]
    fn feasible_at_zero() {
        let o = oracle(&[(1.0, &[0.0, 0.0]), (2.0, &[0.5, 0.5])], &[0.1, 0.1]);
        let (r, m) = solve_mixed_general(&o, &o.bounds, &SubgradientConfig::default()).unwrap();
        assert!(r.lambda.is_zero());
        assert_eq!(m.components.len(), 1);
        assert_eq!(m.aggregate.c0, 1.0);
    }
}
