//! Machine-readable outputs. Key order follows field order, so identical
//! runs serialize to identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use mixedctrl::dual::{OptimalityReport, TraceEntry};
use serde::{Deserialize, Serialize};

use crate::config::Kind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSummary {
    pub lambda_star: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub q_star: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    /// File holding the policy, relative to the output directory.
    pub policy: String,
    pub probability: f64,
    pub cost: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub cost: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSummary {
    pub components: Vec<ComponentSummary>,
    pub aggregate: Aggregate,
    pub gap_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMc {
    pub policy: String,
    pub failures: usize,
    pub rate: f64,
    pub ci: (f64, f64),
    pub boole_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub seed: u64,
    pub n: usize,
    pub failure_rate: f64,
    pub ci: Option<(f64, f64)>,
    pub mean_cost: Option<f64>,
    /// Risk the sample is checked against: the exact aggregate for MDPs, the
    /// Boole bound for control plans.
    pub reference_risk: f64,
    pub consistent: bool,
    pub components: Vec<ComponentMc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub kind: Kind,
    pub status: &'static str,
    pub bound: f64,
    pub dual: DualSummary,
    /// Cheapest pure candidate that meets the bound.
    pub pure: ComponentSummary,
    pub mixed: MixedSummary,
    pub optimality: OptimalityReport,
    pub monte_carlo: Option<McSummary>,
}

/// The parts of a saved report that `validate` replays.
#[derive(Debug, Clone, Deserialize)]
pub struct SavedReport {
    pub kind: Kind,
    pub dual: DualSummary,
    pub mixed: MixedSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub kind: Kind,
    pub costs_match: bool,
    pub optimality: OptimalityReport,
    pub monte_carlo: Option<McSummary>,
    pub passed: bool,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(std::fs::write(path, text)?)
}

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from("iteration,lambda,c0,c1,lagrangian_value\n");
    for t in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.iteration, t.lambda[0], t.c0, t.c_rest[0], t.lagrangian_value
        );
    }
    out
}
