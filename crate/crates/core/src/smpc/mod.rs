//! Chance-constrained open-loop control of linear-Gaussian systems among
//! polytopic obstacles.
//!
//! The joint collision probability is bounded by a sum of per-obstacle,
//! per-step terms. Each term is the smallest single-facet violation
//! probability of its obstacle, and each facet probability is replaced by a
//! piecewise-linear over-approximation of the normal CDF. For a fixed
//! multiplier the resulting problem is a MILP with one binary per facet and
//! step; [`SmpcOracle`] solves it and reports `(Σ|u|₁, Σ δ)` per plan.

mod mc;
mod milp_build;
mod model;
mod oracle;
mod pwl;

pub use mc::{estimate_risk_mc, McEstimate};
pub use milp_build::{
    build_inner_milp, control_box, state_box, FacetScale, InnerMilp, MilpLayout, DET_MARGIN,
    MIN_STDDEV,
};
pub use model::{covariances, mean_trajectory, propagate_covariance, Obstacle, SmpcModel};
pub use oracle::{check_mean_outside, ControlPlan, SmpcConfig, SmpcOracle};
pub use pwl::{phi, PwlCdf};
