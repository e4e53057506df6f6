use serde::{Deserialize, Serialize};

use super::scale;
use crate::cost::{lagrangian_value, Bounds, LagrangianOracle, MixedSolution};

/// Outcome of the six optimality conditions for a mixed solution.
///
/// * `a` every component with positive probability minimizes the Lagrangian
/// * `b` complementary slackness `λ·(c_rest − V) = 0`
/// * `c` probabilities sum to one
/// * `d` probabilities are non-negative
/// * `e` the aggregate meets every bound
/// * `f` each component's cost matches a fresh evaluation of its policy
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
    pub e: bool,
    pub f: bool,
    /// Residuals in the order a..f.
    pub residuals: [f64; 6],
    pub overall: bool,
}

impl OptimalityReport {
    pub fn failed(&self) -> Vec<char> {
        [self.a, self.b, self.c, self.d, self.e, self.f]
            .iter()
            .zip('a'..='f')
            .filter(|(ok, _)| !**ok)
            .map(|(_, name)| name)
            .collect()
    }
}

/// Evaluates the optimality conditions of `solution` at its own dual vector.
///
/// Lagrangian comparisons use `tol` relative to the magnitude of the dual
/// value; probability and bound checks use `tol` as an absolute slack. Oracle
/// failures are folded into the report as failed conditions.
pub fn check_optimality<O: LagrangianOracle>(
    solution: &MixedSolution<O::Policy>,
    v: &Bounds,
    oracle: &O,
    tol: f64,
) -> OptimalityReport {
    let lambda = &solution.dual;
    let mut residuals = [0.0; 6];

    // a) Against the oracle's minimum at λ.
    let (a, q) = match oracle
        .query(lambda)
        .and_then(|best| lagrangian_value(&best.cost, lambda, v))
    {
        Ok(q) => {
            let mut worst: f64 = 0.0;
            let mut ok = true;
            for comp in solution.components.iter().filter(|c| c.probability > tol) {
                match lagrangian_value(&comp.candidate.cost, lambda, v) {
                    Ok(l) => worst = worst.max(l - q),
                    Err(_) => ok = false,
                }
            }
            residuals[0] = worst;
            (ok && worst <= tol * scale(q), q)
        }
        Err(_) => {
            residuals[0] = f64::INFINITY;
            (false, 0.0)
        }
    };

    // b) and e) on the aggregate.
    let agg = &solution.aggregate;
    let dims_ok = agg.k() == v.k() && lambda.k() == v.k();
    let (b, e) = if dims_ok {
        let slack: f64 = (0..v.k())
            .map(|i| (lambda.lambda[i] * (agg.c_rest[i] - v.v[i])).abs())
            .sum();
        let excess = (0..v.k())
            .map(|i| agg.c_rest[i] - v.v[i])
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0);
        residuals[1] = slack;
        residuals[4] = excess;
        (slack <= tol * scale(q), excess <= tol)
    } else {
        residuals[1] = f64::INFINITY;
        residuals[4] = f64::INFINITY;
        (false, false)
    };

    let total: f64 = solution.components.iter().map(|c| c.probability).sum();
    residuals[2] = (total - 1.0).abs();
    let c = residuals[2] <= tol;

    let most_negative = solution
        .components
        .iter()
        .map(|c| c.probability)
        .fold(0.0f64, f64::min);
    residuals[3] = -most_negative;
    let d = most_negative >= 0.0;

    let mut f = true;
    for comp in &solution.components {
        match oracle.evaluate(&comp.candidate.policy) {
            Ok(cost) if cost.k() == comp.candidate.cost.k() => {
                let stored = &comp.candidate.cost;
                let diff = std::iter::once((cost.c0, stored.c0))
                    .chain(cost.c_rest.iter().copied().zip(stored.c_rest.iter().copied()))
                    .map(|(x, y)| (x - y).abs() / scale(y))
                    .fold(0.0f64, f64::max);
                residuals[5] = residuals[5].max(diff);
                f &= diff <= tol;
            }
            _ => {
                residuals[5] = f64::INFINITY;
                f = false;
            }
        }
    }

    OptimalityReport { a, b, c, d, e, f, residuals, overall: a && b && c && d && e && f }
}
