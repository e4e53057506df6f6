use nalgebra::DMatrix;

use super::model::{covariances, SmpcModel};
use super::pwl::PwlCdf;
use crate::error::{Error, Result};
use crate::lpsolve::{solve_lp, Constraint, LpProblem, Relation, Sense};
use crate::milp::MilpProblem;

/// Facets whose standard deviation falls below this are treated as
/// deterministic.
pub const MIN_STDDEV: f64 = 1e-12;

/// Clearance required of a deterministic facet.
pub const DET_MARGIN: f64 = 1e-7;

/// Column layout of the inner MILP.
///
/// Step index `k` runs over `0..N`: control `u_{k+1}` and the risk of state
/// `x_{k+2}`. Mean states are indexed `0..=N` for `x̄_1..x̄_{N+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpLayout {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    /// Facet count of each obstacle.
    pub rows: Vec<usize>,
    u0: usize,
    v0: usize,
    x0: usize,
    d0: usize,
    z_start: Vec<usize>,
    pub n_vars: usize,
}

impl MilpLayout {
    pub fn new(model: &SmpcModel) -> Self {
        let (n, m, h) = (model.n(), model.m(), model.horizon);
        let rows: Vec<usize> = model.obstacles.iter().map(|o| o.rows()).collect();
        let u0 = 0;
        let v0 = u0 + h * m;
        let x0 = v0 + h * m;
        let d0 = x0 + (h + 1) * n;
        let mut z_start = Vec::with_capacity(rows.len());
        let mut next = d0 + rows.len() * h;
        for r in &rows {
            z_start.push(next);
            next += r * h;
        }
        Self { n, m, horizon: h, rows, u0, v0, x0, d0, z_start, n_vars: next }
    }

    pub fn u(&self, k: usize, d: usize) -> usize {
        self.u0 + k * self.m + d
    }

    pub fn v(&self, k: usize, d: usize) -> usize {
        self.v0 + k * self.m + d
    }

    pub fn x(&self, k: usize, d: usize) -> usize {
        self.x0 + k * self.n + d
    }

    pub fn delta(&self, i: usize, k: usize) -> usize {
        self.d0 + i * self.horizon + k
    }

    pub fn z(&self, i: usize, j: usize, k: usize) -> usize {
        self.z_start[i] + k * self.rows[i] + j
    }

    pub fn n_delta(&self) -> usize {
        self.rows.len() * self.horizon
    }

    /// Binary columns in `(obstacle, step, facet)` order.
    pub fn binaries(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, &r) in self.rows.iter().enumerate() {
            for k in 0..self.horizon {
                for j in 0..r {
                    out.push(self.z(i, j, k));
                }
            }
        }
        out
    }
}

/// Normalization of one facet at one step: `y = (h x̄ − g) / s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetScale {
    /// Standard deviation of `h x`, or 0 for a deterministic facet.
    pub s: f64,
    /// Upper bound of `y` (of `h x̄ − g` when deterministic) over the
    /// propagated state box.
    pub y_max: f64,
}

/// The inner MILP together with what is needed to interpret its solution.
#[derive(Debug, Clone)]
pub struct InnerMilp {
    pub problem: MilpProblem,
    pub layout: MilpLayout,
    /// `scales[i][k][j]` for obstacle `i`, step `k`, facet `j`.
    pub scales: Vec<Vec<Vec<FacetScale>>>,
    /// Pairs `(i, k)` whose risk is zero for every admissible plan and were
    /// left without rows.
    pub presolved: Vec<(usize, usize)>,
}

/// Componentwise bounds of each control coordinate over `P u ≤ q`.
pub fn control_box(model: &SmpcModel) -> Result<Vec<(f64, f64)>> {
    let m = model.m();
    let mut out = Vec::with_capacity(m);
    for d in 0..m {
        let mut bounds = [0.0; 2];
        for (slot, sense) in [(0, Sense::Minimize), (1, Sense::Maximize)] {
            let mut obj = vec![0.0; m];
            obj[d] = 1.0;
            let mut lp = LpProblem::new(sense, obj);
            for j in 0..m {
                lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
            }
            for r in 0..model.p.nrows() {
                let row: Vec<f64> = (0..m).map(|c| model.p[(r, c)]).collect();
                lp.add(Constraint::dense(&row, Relation::Le, model.q[r]));
            }
            let sol = solve_lp(&lp)?;
            if !sol.is_optimal() {
                return Err(Error::InvalidInput(format!(
                    "control polytope is {:?} along coordinate {d}",
                    sol.status
                )));
            }
            bounds[slot] = sol.objective;
        }
        out.push((bounds[0], bounds[1]));
    }
    Ok(out)
}

/// Interval bounds of the mean states `x̄_1..x̄_{N+1}` under the control box.
pub fn state_box(model: &SmpcModel, ubox: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
    let n = model.n();
    let mut cur: Vec<(f64, f64)> = model.x0.iter().map(|&x| (x, x)).collect();
    let mut out = vec![cur.clone()];
    for _ in 0..model.horizon {
        let mut next = vec![(0.0, 0.0); n];
        for (r, slot) in next.iter_mut().enumerate() {
            let mut lo = 0.0;
            let mut hi = 0.0;
            for c in 0..n {
                let a = model.a[(r, c)];
                lo += (a * cur[c].0).min(a * cur[c].1);
                hi += (a * cur[c].0).max(a * cur[c].1);
            }
            for (c, &(ul, uh)) in ubox.iter().enumerate() {
                let b = model.b[(r, c)];
                lo += (b * ul).min(b * uh);
                hi += (b * ul).max(b * uh);
            }
            *slot = (lo, hi);
        }
        out.push(next.clone());
        cur = next;
    }
    out
}

fn facet_scales(
    model: &SmpcModel,
    covs: &[DMatrix<f64>],
    xbox: &[Vec<(f64, f64)>],
) -> Vec<Vec<Vec<FacetScale>>> {
    model
        .obstacles
        .iter()
        .map(|o| {
            (0..model.horizon)
                .map(|k| {
                    let sigma = &covs[k + 1];
                    let bx = &xbox[k + 1];
                    (0..o.rows())
                        .map(|j| {
                            let h = o.h.row(j);
                            let s = (h * sigma * h.transpose())[(0, 0)].max(0.0).sqrt();
                            let hx_max: f64 =
                                (0..model.n()).map(|d| (h[d] * bx[d].0).max(h[d] * bx[d].1)).sum();
                            let raw = hx_max - o.g[j];
                            if s < MIN_STDDEV {
                                FacetScale { s: 0.0, y_max: raw }
                            } else {
                                FacetScale { s, y_max: raw / s }
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Builds the inner problem `min Σ|u|₁ + λ Σ δ` over controls, mean states,
/// risk allocations and facet selections.
///
/// PWL rows are emitted lazily and use a per-row big-M taken from interval
/// bounds on the mean states. With `presolve`, obstacle-step pairs that have a
/// facet whose PWL risk is zero over the whole state box get no rows; their
/// `δ` and binaries are fixed to zero. The constant `−λV` is not included.
pub fn build_inner_milp(
    model: &SmpcModel,
    pwl: &PwlCdf,
    lambda: f64,
    presolve: bool,
) -> Result<InnerMilp> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("multiplier {lambda} must be finite and >= 0")));
    }
    model.validate()?;
    let covs = covariances(model);
    let ubox = control_box(model)?;
    let xbox = state_box(model, &ubox);
    let scales = facet_scales(model, &covs, &xbox);

    let lay = MilpLayout::new(model);
    let (n, m, nh) = (lay.n, lay.m, lay.horizon);
    let mut obj = vec![0.0; lay.n_vars];
    for k in 0..nh {
        for d in 0..m {
            obj[lay.v(k, d)] = 1.0;
        }
    }
    for i in 0..model.obstacles.len() {
        for k in 0..nh {
            obj[lay.delta(i, k)] = lambda;
        }
    }
    let mut lp = LpProblem::new(Sense::Minimize, obj);
    for k in 0..nh {
        for d in 0..m {
            lp.set_bounds(lay.u(k, d), ubox[d].0, ubox[d].1);
            lp.set_bounds(lay.v(k, d), 0.0, f64::INFINITY);
        }
    }
    for d in 0..n {
        lp.set_bounds(lay.x(0, d), model.x0[d], model.x0[d]);
    }
    for k in 1..=nh {
        for d in 0..n {
            lp.set_bounds(lay.x(k, d), xbox[k][d].0, xbox[k][d].1);
        }
    }

    // Mean dynamics x̄_{k+1} − A x̄_k − B u_k = 0.
    for k in 0..nh {
        for r in 0..n {
            let mut row = vec![(lay.x(k + 1, r), 1.0)];
            for c in 0..n {
                if model.a[(r, c)] != 0.0 {
                    row.push((lay.x(k, c), -model.a[(r, c)]));
                }
            }
            for c in 0..m {
                if model.b[(r, c)] != 0.0 {
                    row.push((lay.u(k, c), -model.b[(r, c)]));
                }
            }
            lp.add(Constraint::new(row, Relation::Eq, 0.0));
        }
    }
    if let Some(t) = &model.terminal {
        for d in 0..n {
            lp.add(Constraint::new(vec![(lay.x(nh, d), 1.0)], Relation::Eq, t[d]));
        }
    }
    // v ≥ u and v ≥ −u.
    for k in 0..nh {
        for d in 0..m {
            let (u, v) = (lay.u(k, d), lay.v(k, d));
            lp.add(Constraint::new(vec![(u, 1.0), (v, -1.0)], Relation::Le, 0.0));
            lp.add(Constraint::new(vec![(u, -1.0), (v, -1.0)], Relation::Le, 0.0));
        }
    }
    // Control polytope at every step.
    for k in 0..nh {
        for r in 0..model.p.nrows() {
            let row: Vec<(usize, f64)> = (0..m)
                .filter(|&c| model.p[(r, c)] != 0.0)
                .map(|c| (lay.u(k, c), model.p[(r, c)]))
                .collect();
            lp.add(Constraint::new(row, Relation::Le, model.q[r]));
        }
    }

    let mut presolved = Vec::new();
    for (i, o) in model.obstacles.iter().enumerate() {
        for k in 0..nh {
            let sc = &scales[i][k];
            let never_risky = |f: &FacetScale| {
                if f.s == 0.0 {
                    f.y_max < -DET_MARGIN
                } else {
                    pwl.eval(f.y_max) == 0.0
                }
            };
            if presolve && sc.iter().any(never_risky) {
                presolved.push((i, k));
                lp.set_bounds(lay.delta(i, k), 0.0, 0.0);
                for j in 0..o.rows() {
                    lp.set_bounds(lay.z(i, j, k), 0.0, 0.0);
                }
                continue;
            }
            lp.set_bounds(lay.delta(i, k), 0.0, f64::INFINITY);
            let delta = lay.delta(i, k);
            for (j, f) in sc.iter().enumerate() {
                let z = lay.z(i, j, k);
                let hx: Vec<(usize, f64)> = (0..n)
                    .filter(|&d| o.h[(j, d)] != 0.0)
                    .map(|d| (lay.x(k + 1, d), o.h[(j, d)]))
                    .collect();
                if f.s == 0.0 {
                    // h x̄ − g ≤ −margin unless the facet is released.
                    let big_m = (f.y_max + DET_MARGIN).max(0.0);
                    let mut row = hx;
                    row.push((z, -big_m));
                    lp.add(Constraint::new(row, Relation::Le, o.g[j] - DET_MARGIN));
                    continue;
                }
                for &(a, b) in pwl.lines() {
                    // a (h x̄ − g)/s + b ≤ δ + M z
                    let big_m = (a * f.y_max + b).max(0.0);
                    let mut row: Vec<(usize, f64)> =
                        hx.iter().map(|&(c, h)| (c, a * h / f.s)).collect();
                    row.push((delta, -1.0));
                    row.push((z, -big_m));
                    lp.add(Constraint::new(row, Relation::Le, a * o.g[j] / f.s - b).lazy());
                }
            }
            // Risk selection: at least one facet stays enforced.
            let row: Vec<(usize, f64)> = (0..o.rows()).map(|j| (lay.z(i, j, k), 1.0)).collect();
            lp.add(Constraint::new(row, Relation::Le, o.rows() as f64 - 1.0));
        }
    }
    let problem = MilpProblem::new(lp, lay.binaries())?;
    Ok(InnerMilp { problem, layout: lay, scales, presolved })
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::smpc::model::Obstacle;

    fn model(obstacles: Vec<Obstacle>, horizon: usize) -> SmpcModel {
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
            terminal: Some(DVector::from_vec(vec![3.0, 3.0, 0.0, 0.0])),
            v: 0.01,
        }
    }

    #[test]
    fn no_obstacles_means_no_binaries() {
        let p = build_inner_milp(&model(vec![], 4), &PwlCdf::default(), 5.0, false).unwrap();
        assert!(p.problem.binaries.is_empty());
        assert_eq!(p.layout.n_delta(), 0);
        assert!(p.problem.lp.constraints.iter().all(|c| !c.lazy));
    }

    #[test]
    fn counts_follow_obstacles_and_horizon() {
        let obs = vec![
            Obstacle::rectangle(4, (1.0, 2.0), (1.0, 2.0)),
            Obstacle::rectangle(4, (-3.0, -2.0), (0.5, 1.0)),
        ];
        let horizon = 5;
        let pwl = PwlCdf::default();
        let p = build_inner_milp(&model(obs, horizon), &pwl, 5.0, false).unwrap();
        assert_eq!(p.problem.binaries.len(), (4 + 4) * horizon);
        assert_eq!(p.layout.n_delta(), 2 * horizon);
        let lazy = p.problem.lp.constraints.iter().filter(|c| c.lazy).count();
        assert_eq!(lazy, 8 * horizon * pwl.lines().len());
        // Dynamics, terminal, absolute value, control polytope, selection.
        let eager = p.problem.lp.constraints.len() - lazy;
        assert_eq!(eager, 4 * horizon + 4 + 4 * horizon + 4 * horizon + 2 * horizon);
    }

    #[test]
    fn presolve_drops_far_pairs() {
        let far = Obstacle::rectangle(4, (100.0, 101.0), (100.0, 101.0));
        let p = build_inner_milp(&model(vec![far], 3), &PwlCdf::default(), 5.0, true).unwrap();
        assert_eq!(p.presolved.len(), 3);
        assert!(p.problem.lp.constraints.iter().all(|c| !c.lazy));
    }

    #[test]
    fn big_m_covers_state_box() {
        let obs = vec![Obstacle::rectangle(4, (1.0, 2.0), (1.0, 2.0))];
        let p = build_inner_milp(&model(obs, 3), &PwlCdf::default(), 1.0, false).unwrap();
        // After two steps from rest with |u| ≤ 1, |px| ≤ 2.
        let f = p.scales[0][1][0];
        assert!((f.s - 0.1 * 2f64.sqrt()).abs() < 1e-12);
        assert!((f.y_max - (2.0 - 1.0) / f.s).abs() < 1e-9);
    }

    #[test]
    fn unbounded_control_polytope_is_rejected() {
        let mut m = model(vec![], 2);
        m.p = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        m.q = DVector::from_vec(vec![1.0]);
        assert!(build_inner_milp(&m, &PwlCdf::default(), 0.0, false).is_err());
    }

    #[test]
    fn negative_lambda_is_rejected() {
        assert!(build_inner_milp(&model(vec![], 2), &PwlCdf::default(), -1.0, false).is_err());
    }
}
