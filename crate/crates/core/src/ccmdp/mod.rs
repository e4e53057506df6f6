//! Finite-horizon chance-constrained MDPs with first-passage failure.
//!
//! The Lagrangian oracle is exact backward induction on the penalized
//! problem; policy costs come from exact forward propagation. Rollout
//! simulation is for validation only.

mod dp;
mod model;
mod sim;

pub use dp::{
    evaluate_policy, evaluate_policy_with_mass, lagrangian_dp, solve_penalized, DpSolution,
    MdpOracle,
};
pub use model::{EvalResult, Mdp, Policy, Stage, StageBuilder, NO_ACTION, ROW_SUM_TOL};
pub use sim::{simulate, wilson_interval, SimResult, CI_LEVEL};
