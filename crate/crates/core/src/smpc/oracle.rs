use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::milp_build::{build_inner_milp, FacetScale, InnerMilp, DET_MARGIN, MIN_STDDEV};
use super::model::{covariances, mean_trajectory, SmpcModel};
use super::pwl::PwlCdf;
use crate::cost::{Bounds, CostVector, DualVector, LagrangianOracle, PureCandidate};
use crate::error::{Error, Result};
use crate::milp::{solve_milp_with, MilpConfig, MilpStatus};

/// Open-loop plan with its conservative risk allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPlan {
    /// `u_1..u_N`.
    pub u: Vec<Vec<f64>>,
    /// `x̄_1..x̄_{N+1}`.
    pub mean: Vec<Vec<f64>>,
    /// `delta[i][k]` bounds the probability that `x_{k+2}` lies in obstacle `i`.
    pub delta: Vec<Vec<f64>>,
    pub total_risk: f64,
    pub cost: f64,
}

/// Violation probability bound of one facet at a mean state, given the
/// standard deviation of `h x`.
fn facet_risk(pwl: &PwlCdf, s: f64, hx_minus_g: f64) -> f64 {
    if s < MIN_STDDEV {
        if hx_minus_g < -DET_MARGIN / 2.0 {
            0.0
        } else {
            1.0
        }
    } else {
        pwl.eval(hx_minus_g / s)
    }
}

impl ControlPlan {
    /// Rolls out the mean dynamics from `u` and allocates risk with the
    /// smallest single-facet bound of every obstacle and step.
    pub fn from_controls(
        model: &SmpcModel,
        pwl: &PwlCdf,
        covs: &[DMatrix<f64>],
        u: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if u.len() != model.horizon || u.iter().any(|uk| uk.len() != model.m()) {
            return Err(Error::InvalidPolicy(format!(
                "plan needs {} controls of dimension {}",
                model.horizon,
                model.m()
            )));
        }
        if u.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPolicy("controls must be finite".into()));
        }
        let mean = mean_trajectory(model, &u);
        let delta: Vec<Vec<f64>> = model
            .obstacles
            .iter()
            .map(|o| {
                (0..model.horizon)
                    .map(|k| {
                        let x = &mean[k + 1];
                        let sigma = &covs[k + 1];
                        (0..o.rows())
                            .map(|j| {
                                let h = o.h.row(j);
                                let s = (h * sigma * h.transpose())[(0, 0)].max(0.0).sqrt();
                                facet_risk(pwl, s, (h * x)[(0, 0)] - o.g[j])
                            })
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            })
            .collect();
        let total_risk = delta.iter().flatten().sum();
        let cost = u.iter().flatten().map(|x| x.abs()).sum();
        Ok(Self {
            u,
            mean: mean.into_iter().map(|x| x.iter().copied().collect()).collect(),
            delta,
            total_risk,
            cost,
        })
    }

    /// First obstacle and state index (`x_k`, 1-based) at which the mean lies
    /// inside an obstacle.
    pub fn mean_inside(&self, model: &SmpcModel) -> Option<(usize, usize)> {
        for (k, x) in self.mean.iter().enumerate().skip(1) {
            for (i, o) in model.obstacles.iter().enumerate() {
                if o.contains(x) {
                    return Some((i, k + 1));
                }
            }
        }
        None
    }

    /// CSV with one row per state `x_1..x_{N+1}`: the step, the control
    /// applied there, the mean state and the risk bound of each obstacle.
    /// Cells that do not apply are left empty.
    pub fn to_csv(&self) -> String {
        let m = self.u.first().map_or(0, Vec::len);
        let n = self.mean.first().map_or(0, Vec::len);
        let mut head = vec!["step".to_string()];
        head.extend((0..m).map(|d| format!("u{d}")));
        head.extend((0..n).map(|d| format!("mean{d}")));
        head.extend((0..self.delta.len()).map(|i| format!("delta{i}")));
        let mut out = head.join(",");
        out.push('\n');
        for (k, x) in self.mean.iter().enumerate() {
            let mut row = vec![(k + 1).to_string()];
            match self.u.get(k) {
                Some(uk) => row.extend(uk.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), m)),
            }
            row.extend(x.iter().map(|v| v.to_string()));
            for d in &self.delta {
                row.push(if k == 0 { String::new() } else { d[k - 1].to_string() });
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Rejects a plan whose mean trajectory enters an obstacle.
pub fn check_mean_outside(model: &SmpcModel, plan: &ControlPlan) -> Result<()> {
    match plan.mean_inside(model) {
        Some((obstacle, step)) => Err(Error::MeanInsideObstacle { obstacle, step }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SmpcConfig {
    pub presolve: bool,
    pub milp: MilpConfig,
}

impl Default for SmpcConfig {
    fn default() -> Self {
        Self { presolve: true, milp: MilpConfig::default() }
    }
}

/// [`LagrangianOracle`] over open-loop control sequences. The risk entry of
/// each candidate is its Boole-bound risk `Σ δ_ik`.
#[derive(Debug, Clone)]
pub struct SmpcOracle {
    model: SmpcModel,
    pwl: PwlCdf,
    covs: Vec<DMatrix<f64>>,
    base: InnerMilp,
    config: SmpcConfig,
    pub bounds: Bounds,
}

impl SmpcOracle {
    pub fn new(model: SmpcModel, pwl: PwlCdf) -> Result<Self> {
        Self::with_config(model, pwl, SmpcConfig::default())
    }

    pub fn with_config(model: SmpcModel, pwl: PwlCdf, config: SmpcConfig) -> Result<Self> {
        model.validate()?;
        let base = build_inner_milp(&model, &pwl, 0.0, config.presolve)?;
        let covs = covariances(&model);
        let bounds = Bounds::scalar(model.v);
        Ok(Self { model, pwl, covs, base, config, bounds })
    }

    pub fn model(&self) -> &SmpcModel {
        &self.model
    }

    pub fn pwl(&self) -> &PwlCdf {
        &self.pwl
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covs
    }

    /// Number of obstacle-step pairs removed by presolve.
    pub fn presolved_pairs(&self) -> usize {
        self.base.presolved.len()
    }

    /// Solves the inner problem at `lambda`.
    pub fn plan(&self, lambda: f64) -> Result<ControlPlan> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("multiplier {lambda} must be finite and >= 0")));
        }
        let lay = &self.base.layout;
        let mut problem = self.base.problem.clone();
        for i in 0..self.model.obstacles.len() {
            for k in 0..self.model.horizon {
                problem.lp.objective[lay.delta(i, k)] = lambda;
            }
        }
        let heuristic = |x: &[f64]| Some(self.select_facets(x));
        let sol = solve_milp_with(&problem, &self.config.milp, Some(&heuristic))?;
        match sol.status {
            MilpStatus::Optimal => {}
            MilpStatus::Suboptimal => {
                log::warn!("inner MILP at λ = {lambda} stopped at the node limit");
            }
            MilpStatus::Infeasible => return Err(self.diagnose_infeasible()),
            MilpStatus::Unbounded | MilpStatus::NodeLimitNoIncumbent => {
                return Err(Error::InvalidInput(format!(
                    "inner MILP at λ = {lambda} ended with {:?}",
                    sol.status
                )))
            }
        }
        log::debug!("inner MILP at λ = {lambda}: {} nodes", sol.nodes);
        let u = (0..self.model.horizon)
            .map(|k| (0..self.model.m()).map(|d| sol.values[lay.u(k, d)]).collect())
            .collect();
        ControlPlan::from_controls(&self.model, &self.pwl, &self.covs, u)
    }

    /// For every obstacle and step, keeps the facet with the smallest risk at
    /// the relaxed mean states and releases the others.
    fn select_facets(&self, x: &[f64]) -> Vec<f64> {
        let lay = &self.base.layout;
        let mut out = Vec::with_capacity(self.base.problem.binaries.len());
        for (i, o) in self.model.obstacles.iter().enumerate() {
            for k in 0..self.model.horizon {
                if self.base.presolved.contains(&(i, k)) {
                    out.extend(std::iter::repeat_n(0.0, o.rows()));
                    continue;
                }
                let risk = |j: usize, f: &FacetScale| {
                    let hx: f64 = (0..lay.n).map(|d| o.h[(j, d)] * x[lay.x(k + 1, d)]).sum();
                    facet_risk(&self.pwl, f.s, hx - o.g[j])
                };
                let mut best = (0, f64::INFINITY);
                for (j, f) in self.base.scales[i][k].iter().enumerate() {
                    let r = risk(j, f);
                    if r < best.1 {
                        best = (j, r);
                    }
                }
                out.extend((0..o.rows()).map(|j| if j == best.0 { 0.0 } else { 1.0 }));
            }
        }
        out
    }

    fn diagnose_infeasible(&self) -> Error {
        let mut free = self.model.clone();
        free.obstacles.clear();
        let step = self.model.horizon + 1;
        let lp = build_inner_milp(&free, &self.pwl, 0.0, false)
            .and_then(|p| crate::lpsolve::solve_lp(&p.problem.lp));
        match lp {
            Ok(s) if s.is_optimal() => Error::Infeasible(
                "no control sequence keeps every deterministic facet clear".into(),
            ),
            _ if self.model.terminal.is_some() => {
                Error::Infeasible(format!("terminal mean constraint at step {step} unreachable"))
            }
            _ => Error::Infeasible("control constraints admit no sequence".into()),
        }
    }
}

impl LagrangianOracle for SmpcOracle {
    type Policy = ControlPlan;

    fn k_constraints(&self) -> usize {
        1
    }

    fn query(&self, lambda: &DualVector) -> Result<PureCandidate<ControlPlan>> {
        if lambda.k() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: lambda.k() });
        }
        let plan = self.plan(lambda.lambda[0])?;
        let cost = CostVector::new(plan.cost, vec![plan.total_risk])?;
        Ok(PureCandidate::new(plan, cost))
    }

    fn evaluate(&self, plan: &ControlPlan) -> Result<CostVector> {
        let p = ControlPlan::from_controls(&self.model, &self.pwl, &self.covs, plan.u.clone())?;
        CostVector::new(p.cost, vec![p.total_risk])
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::smpc::model::Obstacle;

    fn base(obstacles: Vec<Obstacle>, horizon: usize, target: [f64; 4]) -> SmpcModel {
        let (a, b, sigma_w, p, q) = SmpcModel::double_integrator(1.0, 0.1, 1.0);
        SmpcModel {
            a,
            b,
            sigma_w,
            sigma_x0: DMatrix::zeros(4, 4),
            p,
            q,
            obstacles,
            horizon,
            x0: DVector::zeros(4),
            terminal: Some(DVector::from_row_slice(&target)),
            v: 0.01,
        }
    }

    #[test]
    fn no_obstacles_gives_zero_risk_and_lp_cost() {
        let o = SmpcOracle::new(base(vec![], 4, [3.0, 2.0, 0.0, 0.0]), PwlCdf::default()).unwrap();
        for lambda in [0.0, 1.0, 100.0] {
            let c = o.query(&DualVector::scalar(lambda)).unwrap();
            assert_eq!(c.cost.c1(), 0.0);
            // Cheapest is one push at the first step and one brake at the
            // last, each worth 3 units of travel per unit of control.
            assert!((c.cost.c0 - (2.0 + 4.0 / 3.0)).abs() < 1e-7, "{}", c.cost.c0);
        }
    }

    #[test]
    fn plan_reaches_terminal_mean() {
        let o = SmpcOracle::new(base(vec![], 5, [4.0, -1.0, 0.0, 0.0]), PwlCdf::default()).unwrap();
        let p = o.plan(0.0).unwrap();
        let last = p.mean.last().unwrap();
        for (x, t) in last.iter().zip([4.0, -1.0, 0.0, 0.0]) {
            assert!((x - t).abs() < 1e-7);
        }
        assert_eq!(p.mean.len(), 6);
        assert!(p.u.iter().flatten().all(|u| u.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn unreachable_terminal_names_final_step() {
        let o = SmpcOracle::new(base(vec![], 3, [50.0, 0.0, 0.0, 0.0]), PwlCdf::default()).unwrap();
        match o.plan(1.0) {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("step 4"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn evaluate_matches_query() {
        let obs = vec![Obstacle::rectangle(4, (1.0, 2.0), (-1.0, 0.3))];
        let o = SmpcOracle::new(base(obs, 4, [3.0, 0.0, 0.0, 0.0]), PwlCdf::default()).unwrap();
        for lambda in [0.5, 10.0, 1000.0] {
            let c = o.query(&DualVector::scalar(lambda)).unwrap();
            assert_eq!(o.evaluate(&c.policy).unwrap(), c.cost);
            let total: f64 = c.policy.delta.iter().flatten().sum();
            assert_eq!(total, c.cost.c1());
        }
    }

    #[test]
    fn mean_inside_is_reported() {
        let obs = vec![Obstacle::rectangle(4, (1.0, 2.0), (-1.0, 1.0))];
        let m = base(obs, 4, [3.0, 0.0, 0.0, 0.0]);
        let covs = covariances(&m);
        // Straight along the x axis passes through the box.
        let u = vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![-1.0, 0.0]];
        let p = ControlPlan::from_controls(&m, &PwlCdf::default(), &covs, u).unwrap();
        assert_eq!(p.mean_inside(&m), Some((0, 3)));
        assert!(matches!(
            check_mean_outside(&m, &p),
            Err(Error::MeanInsideObstacle { obstacle: 0, step: 3 })
        ));
    }

    #[test]
    fn csv_has_one_row_per_state() {
        let m = base(vec![Obstacle::rectangle(4, (5.0, 6.0), (5.0, 6.0))], 2, [1.0, 0.0, 0.0, 0.0]);
        let covs = covariances(&m);
        let u = vec![vec![0.5, 0.0], vec![-0.5, 0.0]];
        let p = ControlPlan::from_controls(&m, &PwlCdf::default(), &covs, u).unwrap();
        let csv = p.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "step,u0,u1,mean0,mean1,mean2,mean3,delta0");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("3,,,"));
    }
}
