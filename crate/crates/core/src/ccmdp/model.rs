use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of transition distributions must be within this of one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Marks a state with no assigned action in a [`Policy`].
pub const NO_ACTION: u32 = u32::MAX;

/// Transitions out of one layer, stored in compressed rows.
///
/// Each action points to an outcome distribution over the next layer.
/// Several actions (and states) may share one outcome, which keeps models
/// with translation-invariant noise compact.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    n_states: usize,
    n_next: usize,
    action_start: Vec<usize>,
    action_cost: Vec<f64>,
    action_outcome: Vec<u32>,
    outcome_start: Vec<usize>,
    next_state: Vec<u32>,
    prob: Vec<f64>,
}

impl Stage {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_next(&self) -> usize {
        self.n_next
    }

    pub fn n_actions(&self, state: usize) -> usize {
        self.action_start[state + 1] - self.action_start[state]
    }

    /// Stage cost of a state's `action`-th action.
    pub fn cost(&self, state: usize, action: usize) -> f64 {
        self.action_cost[self.action_start[state] + action]
    }

    /// Outcome index of a state's `action`-th action.
    pub fn outcome_of(&self, state: usize, action: usize) -> usize {
        self.action_outcome[self.action_start[state] + action] as usize
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcome_start.len() - 1
    }

    /// `(next state, probability)` pairs of an outcome.
    pub fn outcome(&self, outcome: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.outcome_start[outcome]..self.outcome_start[outcome + 1];
        self.next_state[r.clone()].iter().map(|&s| s as usize).zip(self.prob[r].iter().copied())
    }

    /// Builds a stage from explicit per-state action lists of
    /// `(cost, sparse distribution)`, with one outcome per action.
    pub fn from_actions(n_next: usize, states: Vec<Vec<(f64, Vec<(usize, f64)>)>>) -> Result<Self> {
        let mut b = StageBuilder::new(n_next);
        for actions in states {
            let mut list = Vec::with_capacity(actions.len());
            for (cost, dist) in actions {
                let o = b.add_outcome(&dist);
                list.push((cost, o));
            }
            b.add_state(&list);
        }
        b.finish()
    }
}

/// Incremental [`Stage`] construction. States are added in index order.
#[derive(Debug, Clone)]
pub struct StageBuilder {
    stage: Stage,
}

impl StageBuilder {
    pub fn new(n_next: usize) -> Self {
        Self {
            stage: Stage {
                n_states: 0,
                n_next,
                action_start: vec![0],
                action_cost: Vec::new(),
                action_outcome: Vec::new(),
                outcome_start: vec![0],
                next_state: Vec::new(),
                prob: Vec::new(),
            },
        }
    }

    /// Adds an outcome distribution and returns its index. Entries with zero
    /// probability are dropped.
    pub fn add_outcome(&mut self, dist: &[(usize, f64)]) -> usize {
        let s = &mut self.stage;
        for &(next, p) in dist {
            if p != 0.0 {
                s.next_state.push(next as u32);
                s.prob.push(p);
            }
        }
        s.outcome_start.push(s.next_state.len());
        s.outcome_start.len() - 2
    }

    /// Adds the next state with its `(cost, outcome)` actions.
    pub fn add_state(&mut self, actions: &[(f64, usize)]) {
        let s = &mut self.stage;
        for &(cost, outcome) in actions {
            s.action_cost.push(cost);
            s.action_outcome.push(outcome as u32);
        }
        s.action_start.push(s.action_cost.len());
        s.n_states += 1;
    }

    pub fn finish(self) -> Result<Stage> {
        let s = self.stage;
        for o in 0..s.n_outcomes() {
            let mut sum = 0.0;
            for (next, p) in s.outcome(o) {
                if next >= s.n_next {
                    return Err(Error::InvalidInput(format!(
                        "outcome {o} reaches state {next} of a layer with {} states",
                        s.n_next
                    )));
                }
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::InvalidInput(format!("outcome {o} has probability {p}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidInput(format!("outcome {o} sums to {sum}")));
            }
        }
        if let Some(c) = s.action_cost.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("stage cost {c} is not finite")));
        }
        if s.action_outcome.iter().any(|&o| o as usize >= s.n_outcomes()) {
            return Err(Error::InvalidInput("action refers to a missing outcome".into()));
        }
        Ok(s)
    }
}

/// Finite-horizon model over layers `0..=T`.
///
/// Decisions are taken at layers `0..T`. A trajectory fails on first entry
/// into a failure state of any layer, including the initial one; failure is
/// absorbing and stops cost accrual. Alive trajectories that reach layer `T`
/// pay its terminal cost.
#[derive(Debug, Clone)]
pub struct Mdp {
    layer_sizes: Vec<usize>,
    failure: Vec<Vec<bool>>,
    stages: Vec<Arc<Stage>>,
    initial: Vec<f64>,
    terminal_cost: Vec<f64>,
}

impl Mdp {
    /// Validates and assembles a model. `terminal_cost` defaults to zero.
    pub fn new(
        failure: Vec<Vec<bool>>,
        stages: Vec<Arc<Stage>>,
        initial: Vec<f64>,
        terminal_cost: Option<Vec<f64>>,
    ) -> Result<Self> {
        let t = stages.len();
        if t == 0 {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if failure.len() != t + 1 {
            return Err(Error::DimensionMismatch { expected: t + 1, found: failure.len() });
        }
        let layer_sizes: Vec<usize> = failure.iter().map(Vec::len).collect();
        for (k, stage) in stages.iter().enumerate() {
            if stage.n_states != layer_sizes[k] {
                return Err(Error::InvalidInput(format!(
                    "stage {k} has {} states but layer {k} has {}",
                    stage.n_states, layer_sizes[k]
                )));
            }
            if stage.n_next != layer_sizes[k + 1] {
                return Err(Error::InvalidInput(format!(
                    "stage {k} targets {} states but layer {} has {}",
                    stage.n_next,
                    k + 1,
                    layer_sizes[k + 1]
                )));
            }
            for x in 0..stage.n_states {
                if !failure[k][x] && stage.n_actions(x) == 0 {
                    return Err(Error::InvalidInput(format!(
                        "alive state {x} of layer {k} has no action"
                    )));
                }
            }
        }
        if initial.len() != layer_sizes[0] {
            return Err(Error::DimensionMismatch { expected: layer_sizes[0], found: initial.len() });
        }
        if initial.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidInput("initial probabilities must be nonnegative".into()));
        }
        let sum: f64 = initial.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidInput(format!("initial distribution sums to {sum}")));
        }
        let terminal_cost = terminal_cost.unwrap_or_else(|| vec![0.0; layer_sizes[t]]);
        if terminal_cost.len() != layer_sizes[t] {
            return Err(Error::DimensionMismatch {
                expected: layer_sizes[t],
                found: terminal_cost.len(),
            });
        }
        if terminal_cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("terminal costs must be finite".into()));
        }
        Ok(Self { layer_sizes, failure, stages, initial, terminal_cost })
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn layer_size(&self, k: usize) -> usize {
        self.layer_sizes[k]
    }

    pub fn is_failure(&self, k: usize, x: usize) -> bool {
        self.failure[k][x]
    }

    pub fn failure_layer(&self, k: usize) -> &[bool] {
        &self.failure[k]
    }

    pub fn stage(&self, k: usize) -> &Stage {
        &self.stages[k]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn terminal_cost(&self) -> &[f64] {
        &self.terminal_cost
    }
}

/// Deterministic Markov policy: the action index chosen in each alive state
/// of each decision layer, or [`NO_ACTION`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    pub actions: Vec<Vec<u32>>,
}

impl Policy {
    pub fn action(&self, k: usize, x: usize) -> Option<usize> {
        match self.actions.get(k)?.get(x)? {
            &NO_ACTION => None,
            &a => Some(a as usize),
        }
    }
}

/// Exact cost and first-passage failure probability of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub expected_cost: f64,
    pub failure_prob: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_shares_outcomes() {
        let mut b = StageBuilder::new(2);
        let o = b.add_outcome(&[(0, 0.25), (1, 0.75)]);
        b.add_state(&[(1.0, o), (2.0, o)]);
        b.add_state(&[(3.0, o)]);
        let s = b.finish().unwrap();
        assert_eq!(s.n_outcomes(), 1);
        assert_eq!(s.n_actions(0), 2);
        assert_eq!(s.cost(1, 0), 3.0);
        assert_eq!(s.outcome(s.outcome_of(0, 1)).collect::<Vec<_>>(), vec![(0, 0.25), (1, 0.75)]);
    }

    #[test]
    fn rejects_bad_rows() {
        let mut b = StageBuilder::new(2);
        b.add_outcome(&[(0, 0.5), (1, 0.4)]);
        assert!(b.finish().is_err());
        let mut b = StageBuilder::new(1);
        b.add_outcome(&[(3, 1.0)]);
        assert!(b.finish().is_err());
    }

    #[test]
    fn rejects_inconsistent_layers() {
        let stage = Arc::new(Stage::from_actions(1, vec![vec![(1.0, vec![(0, 1.0)])]]).unwrap());
        // Two layers of one state each are needed for one stage.
        assert!(Mdp::new(vec![vec![false]], vec![stage.clone()], vec![1.0], None).is_err());
        assert!(Mdp::new(vec![vec![false], vec![false]], vec![stage.clone()], vec![0.5], None).is_err());
        assert!(Mdp::new(vec![vec![false], vec![false]], vec![stage], vec![1.0], None).is_ok());
        // Alive states need an action.
        let empty = Arc::new(Stage::from_actions(1, vec![vec![]]).unwrap());
        assert!(Mdp::new(vec![vec![false], vec![false]], vec![empty], vec![1.0], None).is_err());
    }
}
