//! Per-kind policy files and Monte Carlo checks.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mixedctrl::ccmdp::{simulate, Mdp, Policy, NO_ACTION};
use mixedctrl::smpc::{check_mean_outside, estimate_risk_mc, ControlPlan, SmpcOracle};
use mixedctrl::MixedSolution;

use crate::config::MonteCarloSettings;
use crate::report::{ComponentMc, McSummary};

/// How a problem kind stores its policies and validates them by sampling.
pub trait PolicyIo<P> {
    fn file_name(&self, id: &str) -> String;
    fn write(&self, policy: &P, path: &Path) -> Result<()>;
    fn read(&self, path: &Path) -> Result<P>;
    fn monte_carlo(&self, mixed: &MixedSolution<P>, mc: &MonteCarloSettings) -> Result<Option<McSummary>>;

    /// Extra acceptance checks on a recovered mixture.
    fn gate(&self, _mixed: &MixedSolution<P>) -> Result<()> {
        Ok(())
    }
}

/// Finite-set policies are point indices.
pub struct ToyIo;

impl PolicyIo<usize> for ToyIo {
    fn file_name(&self, id: &str) -> String {
        format!("{id}.txt")
    }

    fn write(&self, policy: &usize, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, format!("{policy}\n"))?)
    }

    fn read(&self, path: &Path) -> Result<usize> {
        let text = std::fs::read_to_string(path)?;
        text.trim().parse().with_context(|| format!("bad point index in {}", path.display()))
    }

    fn monte_carlo(&self, _: &MixedSolution<usize>, _: &MonteCarloSettings) -> Result<Option<McSummary>> {
        Ok(None)
    }
}

/// MDP policies as `step,state,action` rows over alive states.
pub struct MdpIo<'a> {
    pub mdp: &'a Mdp,
}

impl PolicyIo<Policy> for MdpIo<'_> {
    fn file_name(&self, id: &str) -> String {
        format!("{id}.csv")
    }

    fn write(&self, policy: &Policy, path: &Path) -> Result<()> {
        let mut out = String::from("step,state,action\n");
        for (k, layer) in policy.actions.iter().enumerate() {
            for (x, &a) in layer.iter().enumerate() {
                if a != NO_ACTION {
                    out.push_str(&format!("{k},{x},{a}\n"));
                }
            }
        }
        Ok(std::fs::write(path, out)?)
    }

    fn read(&self, path: &Path) -> Result<Policy> {
        let text = std::fs::read_to_string(path)?;
        let mdp = self.mdp;
        let mut actions: Vec<Vec<u32>> =
            (0..mdp.horizon()).map(|k| vec![NO_ACTION; mdp.layer_size(k)]).collect();
        for (i, line) in text.lines().enumerate().skip(1) {
            let f: Vec<usize> = line
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("{}:{}: bad row", path.display(), i + 1))?;
            let [k, x, a] = f[..] else {
                bail!("{}:{}: expected three columns", path.display(), i + 1);
            };
            if k >= mdp.horizon() || x >= mdp.layer_size(k) || a >= mdp.stage(k).n_actions(x) {
                bail!("{}:{}: entry out of range", path.display(), i + 1);
            }
            actions[k][x] = a as u32;
        }
        Ok(Policy { actions })
    }

    fn monte_carlo(&self, mixed: &MixedSolution<Policy>, mc: &MonteCarloSettings) -> Result<Option<McSummary>> {
        if mc.n == 0 {
            return Ok(None);
        }
        let sim = simulate(self.mdp, mixed, mc.seed, mc.n)?;
        let risk = mixed.aggregate.c1();
        Ok(Some(McSummary {
            seed: mc.seed,
            n: mc.n,
            failure_rate: sim.empirical_failure_rate,
            ci: Some(sim.ci),
            mean_cost: Some(sim.empirical_cost_mean),
            reference_risk: risk,
            consistent: sim.ci.0 <= risk && risk <= sim.ci.1,
            components: Vec::new(),
        }))
    }
}

/// Control plans in the CSV layout of [`ControlPlan::to_csv`].
pub struct SmpcIo<'a> {
    pub oracle: &'a SmpcOracle,
}

impl PolicyIo<ControlPlan> for SmpcIo<'_> {
    fn file_name(&self, id: &str) -> String {
        format!("{id}_plan.csv")
    }

    fn write(&self, plan: &ControlPlan, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, plan.to_csv())?)
    }

    fn read(&self, path: &Path) -> Result<ControlPlan> {
        let model = self.oracle.model();
        let text = std::fs::read_to_string(path)?;
        let mut u = Vec::with_capacity(model.horizon);
        for (i, line) in text.lines().enumerate().skip(1).take(model.horizon) {
            let row: Vec<f64> = line
                .split(',')
                .skip(1)
                .take(model.m())
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("{}:{}: bad control", path.display(), i + 1))?;
            u.push(row);
        }
        Ok(ControlPlan::from_controls(model, self.oracle.pwl(), self.oracle.covariances(), u)?)
    }

    /// Samples every component separately; the mixture rate is their
    /// probability-weighted mean. Each component must stay below its own
    /// Boole bound at the interval's lower end.
    fn monte_carlo(&self, mixed: &MixedSolution<ControlPlan>, mc: &MonteCarloSettings) -> Result<Option<McSummary>> {
        if mc.n == 0 {
            return Ok(None);
        }
        let mut components = Vec::new();
        let mut rate = 0.0;
        for (i, c) in mixed.components.iter().enumerate() {
            let plan = &c.candidate.policy;
            let est = estimate_risk_mc(self.oracle.model(), plan, mc.seed.wrapping_add(i as u64), mc.n)?;
            rate += c.probability * est.rate;
            components.push(ComponentMc {
                policy: format!("component_{i}"),
                failures: est.violations,
                rate: est.rate,
                ci: est.ci,
                boole_risk: plan.total_risk,
            });
        }
        Ok(Some(McSummary {
            seed: mc.seed,
            n: mc.n,
            failure_rate: rate,
            ci: None,
            mean_cost: None,
            reference_risk: mixed.aggregate.c1(),
            consistent: components.iter().all(|c| c.ci.0 <= c.boole_risk),
            components,
        }))
    }

    fn gate(&self, mixed: &MixedSolution<ControlPlan>) -> Result<()> {
        for c in mixed.components.iter().filter(|c| c.probability > 0.0) {
            check_mean_outside(self.oracle.model(), &c.candidate.policy)?;
        }
        Ok(())
    }
}
