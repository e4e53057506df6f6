//! Dual optimization of the pure-strategy problem and recovery of the
//! optimal mixture.
//!
//! The pure-strategy problem and its randomized counterpart share the same
//! dual, so maximizing `q(λ) = min_c c0 + λ·(c_rest − V)` through a
//! [`LagrangianOracle`] gives the multipliers of the optimal mixture, and the
//! minimizers seen near the optimum are the mixture's components.
//!
//! * [`solve_dual_scalar`] brackets and bisects the monotone map
//!   `λ ↦ c1(λ) − V` for a single constraint.
//! * [`solve_dual_subgradient`] runs projected subgradient ascent for any
//!   number of constraints and returns the pool of distinct minimizers.
//! * [`recover_mixture_scalar`] / [`recover_mixture_general`] turn the dual
//!   answer into probabilities.
//! * [`check_optimality`] evaluates the six optimality conditions on any
//!   mixture.

mod optimality;
mod recover;
mod scalar;
mod subgradient;

use serde::Serialize;

use crate::cost::{lagrangian_value, Bounds, DualVector, LagrangianOracle, PureCandidate};
use crate::error::Result;

pub use optimality::{check_optimality, OptimalityReport};
pub use recover::{recover_mixture_general, recover_mixture_scalar};
pub use scalar::{solve_dual_scalar, solve_mixed_scalar, ScalarDualConfig, ScalarDualResult};
pub use subgradient::{
    solve_dual_subgradient, solve_mixed_general, SubgradientConfig, SubgradientResult,
};

/// One oracle query on the dual path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub lambda: Vec<f64>,
    pub c0: f64,
    pub c_rest: Vec<f64>,
    pub lagrangian_value: f64,
}

/// Wraps an oracle and records every query for the dual trace.
pub(crate) struct TracedOracle<'a, O: LagrangianOracle> {
    pub oracle: &'a O,
    pub v: &'a Bounds,
    pub trace: Vec<TraceEntry>,
}

impl<'a, O: LagrangianOracle> TracedOracle<'a, O> {
    pub fn new(oracle: &'a O, v: &'a Bounds) -> Self {
        Self { oracle, v, trace: Vec::new() }
    }

    pub fn query(&mut self, lambda: &DualVector) -> Result<(PureCandidate<O::Policy>, f64)> {
        let cand = self.oracle.query(lambda)?;
        let value = lagrangian_value(&cand.cost, lambda, self.v)?;
        self.trace.push(TraceEntry {
            iteration: self.trace.len(),
            lambda: lambda.lambda.clone(),
            c0: cand.cost.c0,
            c_rest: cand.cost.c_rest.clone(),
            lagrangian_value: value,
        });
        Ok((cand, value))
    }
}

/// Relative tolerance scale used when comparing Lagrangian values.
pub(crate) fn scale(x: f64) -> f64 {
    x.abs().max(1.0)
}
