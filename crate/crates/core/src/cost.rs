//! Cost vectors, multipliers, mixtures and the Lagrangian oracle contract.
//!
//! A pure policy is summarized by its cost vector `(c0, c1..cK)`: the
//! expected objective followed by the `K` constraint expectations. Mixing
//! policies at time zero yields the probability-weighted sum of their cost
//! vectors, so every backend only has to expose a minimizer of
//! `c0 + λ·(c_rest − V)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the probability sum accepted by [`mix_costs`].
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

/// Objective expectation plus `K >= 1` constraint expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector {
    pub c0: f64,
    pub c_rest: Vec<f64>,
}

impl CostVector {
    pub fn new(c0: f64, c_rest: Vec<f64>) -> Result<Self> {
        if c_rest.is_empty() {
            return Err(Error::InvalidInput(
                "cost vector needs at least one constraint entry".into(),
            ));
        }
        if !c0.is_finite() || c_rest.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("cost vector entries must be finite".into()));
        }
        Ok(Self { c0, c_rest })
    }

    /// Shorthand for the common single-constraint case.
    pub fn scalar(c0: f64, c1: f64) -> Self {
        Self { c0, c_rest: vec![c1] }
    }

    pub fn k(&self) -> usize {
        self.c_rest.len()
    }

    /// First constraint value (the risk in chance-constrained problems).
    pub fn c1(&self) -> f64 {
        self.c_rest[0]
    }

    /// Bitwise equality, used to deduplicate candidate pools.
    pub fn same_bits(&self, other: &CostVector) -> bool {
        self.c0.to_bits() == other.c0.to_bits()
            && self.c_rest.len() == other.c_rest.len()
            && self
                .c_rest
                .iter()
                .zip(&other.c_rest)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Constraint thresholds `V1..VK`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub v: Vec<f64>,
}

impl Bounds {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidInput("bounds need at least one entry".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("bounds must be finite".into()));
        }
        Ok(Self { v })
    }

    pub fn scalar(v: f64) -> Self {
        Self { v: vec![v] }
    }

    pub fn k(&self) -> usize {
        self.v.len()
    }
}

/// Nonnegative Lagrange multipliers, one per constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub lambda: Vec<f64>,
}

impl DualVector {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput(
                "multipliers must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { lambda })
    }

    pub fn zeros(k: usize) -> Self {
        Self { lambda: vec![0.0; k] }
    }

    /// Single multiplier; negative input is clamped to zero.
    pub fn scalar(lambda: f64) -> Self {
        Self { lambda: vec![lambda.max(0.0)] }
    }

    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_zero(&self) -> bool {
        self.lambda.iter().all(|l| *l == 0.0)
    }
}

/// A policy handle together with its exact cost vector.
#[derive(Debug, Clone)]
pub struct PureCandidate<P> {
    pub policy: P,
    pub cost: CostVector,
}

impl<P> PureCandidate<P> {
    pub fn new(policy: P, cost: CostVector) -> Self {
        Self { policy, cost }
    }
}

/// One entry of a mixture.
#[derive(Debug, Clone)]
pub struct Component<P> {
    pub candidate: PureCandidate<P>,
    pub probability: f64,
}

/// Up to `K + 1` pure candidates selected once at time zero with the given
/// probabilities.
#[derive(Debug, Clone)]
pub struct MixedSolution<P> {
    pub components: Vec<Component<P>>,
    pub aggregate: CostVector,
    pub dual: DualVector,
    pub gap_estimate: f64,
}

impl<P> MixedSolution<P> {
    /// Builds a mixture and computes its aggregate cost vector.
    pub fn new(components: Vec<Component<P>>, dual: DualVector, gap_estimate: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        let aggregate = mix_costs(
            &components
                .iter()
                .map(|c| (&c.candidate.cost, c.probability))
                .collect::<Vec<_>>(),
        )?;
        Ok(Self {
            components,
            aggregate,
            dual,
            gap_estimate: gap_estimate.max(0.0),
        })
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.probability).collect()
    }

    pub fn k(&self) -> usize {
        self.aggregate.k()
    }
}

/// Componentwise probability-weighted sum of cost vectors.
pub fn mix_costs(components: &[(&CostVector, f64)]) -> Result<CostVector> {
    let Some((first, _)) = components.first() else {
        return Err(Error::InvalidInput("no components to mix".into()));
    };
    let k = first.k();
    let mut total_p = 0.0;
    let mut c0 = 0.0;
    let mut c_rest = vec![0.0; k];
    for (cost, p) in components {
        if cost.k() != k {
            return Err(Error::DimensionMismatch { expected: k, found: cost.k() });
        }
        if !(p.is_finite() && *p >= 0.0) {
            return Err(Error::InvalidInput(format!("negative or non-finite probability {p}")));
        }
        total_p += p;
        c0 += p * cost.c0;
        for (acc, c) in c_rest.iter_mut().zip(&cost.c_rest) {
            *acc += p * c;
        }
    }
    if (total_p - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::InvalidInput(format!("probabilities sum to {total_p}, not 1")));
    }
    Ok(CostVector { c0, c_rest })
}

/// `c0 + Σ λ_i (c_i − V_i)`.
pub fn lagrangian_value(c: &CostVector, lambda: &DualVector, v: &Bounds) -> Result<f64> {
    let k = c.k();
    if lambda.k() != k {
        return Err(Error::DimensionMismatch { expected: k, found: lambda.k() });
    }
    if v.k() != k {
        return Err(Error::DimensionMismatch { expected: k, found: v.k() });
    }
    Ok(c.c0
        + lambda
            .lambda
            .iter()
            .zip(c.c_rest.iter().zip(&v.v))
            .map(|(l, (ci, vi))| l * (ci - vi))
            .sum::<f64>())
}

/// A problem backend that minimizes the Lagrangian over its policy class.
///
/// `query` must be deterministic: identical multipliers yield identical
/// candidates, with ties broken by a fixed backend rule. Returned cost vectors
/// are exact expectations, never sampled estimates.
pub trait LagrangianOracle {
    type Policy: Clone + std::fmt::Debug;

    /// Number of constraints `K`.
    fn k_constraints(&self) -> usize;

    /// Returns a minimizer of `c0 + λ·(c_rest − V)` and its exact cost vector.
    fn query(&self, lambda: &DualVector) -> Result<PureCandidate<Self::Policy>>;

    /// Re-evaluates a policy from scratch.
    fn evaluate(&self, policy: &Self::Policy) -> Result<CostVector>;
}

impl<O: LagrangianOracle + ?Sized> LagrangianOracle for &O {
    type Policy = O::Policy;

    fn k_constraints(&self) -> usize {
        (**self).k_constraints()
    }

    fn query(&self, lambda: &DualVector) -> Result<PureCandidate<Self::Policy>> {
        (**self).query(lambda)
    }

    fn evaluate(&self, policy: &Self::Policy) -> Result<CostVector> {
        (**self).evaluate(policy)
    }
}
