//! Best-first branch-and-bound over binary variables.
//!
//! Every node is an LP relaxation solved by [`crate::lpsolve`] with some
//! binaries fixed through their bounds. Lazy rows discovered at any node stay
//! active for all later nodes since they are rows of the original problem.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpsolve::{LpProblem, LpSolution, LpStatus, Sense, WarmLp};

/// Binaries within this distance of 0 or 1 count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub binaries: Vec<usize>,
}

impl MilpProblem {
    /// Wraps `lp` and clamps the relaxation bounds of `binaries` to `[0, 1]`.
    pub fn new(mut lp: LpProblem, binaries: Vec<usize>) -> Result<Self> {
        let n = lp.num_vars();
        for &j in &binaries {
            if j >= n {
                return Err(Error::DimensionMismatch { expected: n, found: j + 1 });
            }
            lp.lower[j] = lp.lower[j].max(0.0);
            lp.upper[j] = lp.upper[j].min(1.0);
        }
        let mut sorted = binaries.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != binaries.len() {
            return Err(Error::InvalidInput("duplicate binary index".into()));
        }
        Ok(Self { lp, binaries })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MilpConfig {
    pub abs_gap: f64,
    pub max_nodes: usize,
}

impl Default for MilpConfig {
    fn default() -> Self {
        Self { abs_gap: 1e-6, max_nodes: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node budget exhausted; `values` hold the best incumbent, if any.
    Suboptimal,
    NodeLimitNoIncumbent,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub nodes: usize,
    /// Objective of the root LP relaxation.
    pub root_bound: f64,
}

/// Proposes a full binary assignment (ordered like `MilpProblem::binaries`)
/// from a fractional relaxation solution.
pub type Heuristic<'a> = &'a dyn Fn(&[f64]) -> Option<Vec<f64>>;

pub fn solve_milp(p: &MilpProblem, config: &MilpConfig) -> Result<MilpSolution> {
    solve_milp_with(p, config, None)
}

/// Memory allowed for parent tableaus kept to warm-start queued nodes.
const WARM_BUDGET_BYTES: usize = 256 << 20;

struct Node {
    bound: f64,
    id: usize,
    fixes: Vec<(usize, f64)>,
    /// Parent LP state; children re-solve from it with one more bound fixed.
    warm: Option<Arc<WarmLp>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap order: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Branch-and-bound with an optional primal heuristic called at every
/// fractional node.
pub fn solve_milp_with(
    p: &MilpProblem,
    config: &MilpConfig,
    heuristic: Option<Heuristic<'_>>,
) -> Result<MilpSolution> {
    // Work in minimization form internally.
    let sign = match p.lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut active: Vec<bool> = p.lp.constraints.iter().map(|c| !c.lazy).collect();
    let mut relax = p.lp.clone();

    // Solves the relaxation under `fixes`, from `warm` when given.
    let mut solve_node = |fixes: &[(usize, f64)],
                          warm: Option<WarmLp>,
                          active: &mut Vec<bool>|
     -> Result<(LpSolution, WarmLp)> {
        relax.lower.clone_from(&p.lp.lower);
        relax.upper.clone_from(&p.lp.upper);
        for &(j, v) in fixes {
            relax.lower[j] = v;
            relax.upper[j] = v;
        }
        match warm {
            Some(mut w) => {
                let sol = w.resolve(&relax, active)?;
                Ok((sol, w))
            }
            None => WarmLp::solve(&relax, active),
        }
    };

    let (root, root_warm) = solve_node(&[], None, &mut active)?;
    let warm_cap = (WARM_BUDGET_BYTES / root_warm.approx_bytes().max(1)).max(4);
    let root_bound = root.objective;
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Ok(MilpSolution {
                status: MilpStatus::Infeasible,
                values: root.x,
                objective: f64::NAN,
                nodes: 1,
                root_bound,
            })
        }
        LpStatus::Unbounded => {
            return Ok(MilpSolution {
                status: MilpStatus::Unbounded,
                values: root.x,
                objective: root.objective,
                nodes: 1,
                root_bound,
            })
        }
        LpStatus::IterationLimit => {
            return Err(Error::InvalidInput("root relaxation hit the iteration limit".into()))
        }
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut nodes = 0usize;
    let mut pending_root = Some((root, root_warm));
    heap.push(Node { bound: sign * root_bound, id: next_id, fixes: Vec::new(), warm: None });
    next_id += 1;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - config.abs_gap {
                break;
            }
        }
        if nodes >= config.max_nodes {
            let (status, values, objective) = match incumbent {
                Some((obj, x)) => (MilpStatus::Suboptimal, x, sign * obj),
                None => (MilpStatus::NodeLimitNoIncumbent, Vec::new(), f64::NAN),
            };
            return Ok(MilpSolution { status, values, objective, nodes, root_bound });
        }
        nodes += 1;
        let (sol, warm) = match pending_root.take() {
            Some(r) => r,
            None => {
                let w = node.warm.map(|a| Arc::try_unwrap(a).unwrap_or_else(|a| (*a).clone()));
                solve_node(&node.fixes, w, &mut active)?
            }
        };
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let obj = sign * sol.objective;
        if let Some((best, _)) = &incumbent {
            if obj >= best - config.abs_gap {
                continue;
            }
        }

        let branch = most_fractional(&sol.x, &p.binaries);
        let Some(j) = branch else {
            // Integral: polish with binaries snapped to exact 0/1.
            let mut fixes = node.fixes.clone();
            for &b in &p.binaries {
                if !fixes.iter().any(|(k, _)| *k == b) {
                    fixes.push((b, sol.x[b].round()));
                }
            }
            let (polished, _) = solve_node(&fixes, Some(warm), &mut active)?;
            let (o, x) = if polished.status == LpStatus::Optimal {
                (sign * polished.objective, polished.x)
            } else {
                (obj, sol.x)
            };
            if incumbent.as_ref().is_none_or(|(best, _)| o < *best) {
                incumbent = Some((o, x));
            }
            continue;
        };

        if let Some(h) = heuristic {
            if let Some(assign) = h(&sol.x) {
                if assign.len() == p.binaries.len() {
                    let fixes: Vec<(usize, f64)> = p
                        .binaries
                        .iter()
                        .zip(&assign)
                        .map(|(&b, &v)| (b, if v >= 0.5 { 1.0 } else { 0.0 }))
                        .collect();
                    let (trial, _) = solve_node(&fixes, Some(warm.clone()), &mut active)?;
                    if trial.status == LpStatus::Optimal {
                        let o = sign * trial.objective;
                        if incumbent.as_ref().is_none_or(|(best, _)| o < *best) {
                            incumbent = Some((o, trial.x));
                        }
                    }
                    if let Some((best, _)) = &incumbent {
                        if obj >= best - config.abs_gap {
                            continue;
                        }
                    }
                }
            }
        }

        let shared = (heap.len() + 2 <= warm_cap).then(|| Arc::new(warm));
        for v in [0.0, 1.0] {
            let mut fixes = node.fixes.clone();
            fixes.push((j, v));
            heap.push(Node { bound: obj, id: next_id, fixes, warm: shared.clone() });
            next_id += 1;
        }
    }

    match incumbent {
        Some((obj, x)) => Ok(MilpSolution {
            status: MilpStatus::Optimal,
            values: x,
            objective: sign * obj,
            nodes,
            root_bound,
        }),
        None => Ok(MilpSolution {
            status: MilpStatus::Infeasible,
            values: Vec::new(),
            objective: f64::NAN,
            nodes,
            root_bound,
        }),
    }
}

/// Binary farthest from integrality, lowest index on ties; `None` when all
/// binaries are integral.
fn most_fractional(x: &[f64], binaries: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in binaries {
        let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
        if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpsolve::{Constraint, Relation};

    #[test]
    fn knapsack_three_items() {
        let mut lp = LpProblem::new(Sense::Maximize, vec![5.0, 4.0, 3.0]);
        lp.add(Constraint::dense(&[2.0, 3.0, 1.0], Relation::Le, 5.0));
        let p = MilpProblem::new(lp, vec![0, 1, 2]).unwrap();
        let s = solve_milp(&p, &MilpConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective - 9.0).abs() < 1e-9);
        assert_eq!(s.values.iter().map(|v| v.round() as i32).collect::<Vec<_>>(), vec![1, 1, 0]);
        assert!(s.root_bound >= s.objective - 1e-9);
    }

    #[test]
    fn integral_root_needs_no_branching() {
        let mut lp = LpProblem::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.add(Constraint::dense(&[1.0, 1.0], Relation::Ge, 1.0));
        lp.add(Constraint::dense(&[1.0, 0.0], Relation::Ge, 1.0));
        let p = MilpProblem::new(lp, vec![0, 1]).unwrap();
        let s = solve_milp(&p, &MilpConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.nodes, 1);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_root() {
        let mut lp = LpProblem::new(Sense::Minimize, vec![1.0]);
        lp.add(Constraint::dense(&[1.0], Relation::Ge, 2.0));
        let p = MilpProblem::new(lp, vec![0]).unwrap();
        assert_eq!(solve_milp(&p, &MilpConfig::default()).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn integer_infeasible_with_feasible_relaxation() {
        let mut lp = LpProblem::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.add(Constraint::dense(&[1.0, 1.0], Relation::Eq, 1.0));
        lp.add(Constraint::dense(&[1.0, -1.0], Relation::Eq, 0.0));
        let p = MilpProblem::new(lp, vec![0, 1]).unwrap();
        assert_eq!(solve_milp(&p, &MilpConfig::default()).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_budget_reports_suboptimal() {
        let n = 12;
        let w: Vec<f64> = (0..n).map(|i| 3.0 + (i as f64 * 1.7) % 5.0).collect();
        let v: Vec<f64> = (0..n).map(|i| 4.0 + (i as f64 * 2.3) % 7.0).collect();
        let mut lp = LpProblem::new(Sense::Maximize, v);
        lp.add(Constraint::dense(&w, Relation::Le, 17.5));
        let p = MilpProblem::new(lp, (0..n).collect()).unwrap();
        let s = solve_milp(&p, &MilpConfig { abs_gap: 1e-6, max_nodes: 2 }).unwrap();
        assert!(matches!(s.status, MilpStatus::Suboptimal | MilpStatus::NodeLimitNoIncumbent));
    }

    #[test]
    fn rejects_bad_binary_index() {
        let lp = LpProblem::new(Sense::Minimize, vec![1.0]);
        assert!(MilpProblem::new(lp.clone(), vec![1]).is_err());
        assert!(MilpProblem::new(lp, vec![0, 0]).is_err());
    }
}
