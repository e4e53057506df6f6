//! Dense primal simplex for small linear programs.
//!
//! Variables carry explicit lower/upper bounds (either may be infinite), so
//! binaries and box-bounded controls never add rows. Each constraint row gets
//! a slack column whose bounds encode the relation, and rows whose slack
//! starts out of bounds get an artificial column for phase 1. The entering
//! column is the lowest-index improving one with an acceptable pivot, and
//! the leaving row comes from a Harris ratio test. The tableau is rebuilt
//! from an LU factorization of the basis periodically and whenever the
//! final point fails the original rows. [`WarmLp`] keeps the tableau so
//! that added rows and changed bounds are handled by a dual simplex from
//! the previous basis.
//!
//! Rows flagged `lazy` start outside the working LP and are added once the
//! working optimum violates them. The final answer is optimal for the full
//! problem.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot magnitude below which a tableau entry counts as zero.
pub const PIVOT_TOL: f64 = 1e-9;
/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
/// Pivots below this magnitude are taken only when no column offers better.
const STABLE_PIVOT: f64 = 1e-6;
const MAX_REJECTED: usize = 32;
/// Looser reduced-cost tolerance for accepting a warm basis as dual feasible.
const DUAL_FEAS_TOL: f64 = 1e-7;
const RESIDUAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 200;
/// Smallest entry that may block a ray that would otherwise be unbounded.
const TINY_PIVOT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub lazy: bool,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self { coeffs, relation, rhs, lazy: false }
    }

    pub fn dense(row: &[f64], relation: Relation, rhs: f64) -> Self {
        let coeffs = row
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(j, a)| (j, *a))
            .collect();
        Self::new(coeffs, relation, rhs)
    }

    pub fn lazy(mut self) -> Self {
        self.lazy = true;
        self
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|(j, a)| a * x[*j]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// A problem over `n` variables with default bounds `[0, ∞)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, c: Constraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let bounds = x.iter().enumerate().map(|(j, v)| {
            (self.lower[j] - v).max(v - self.upper[j]).max(0.0)
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.lower.len() });
        }
        if self.upper.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.upper.len() });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("objective coefficients must be finite".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(Error::InvalidInput(format!("bad bounds on variable {j}")));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!("bad bounds on variable {j}")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::InvalidInput(format!("row {i}: non-finite right-hand side")));
            }
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return Err(Error::DimensionMismatch { expected: n, found: j + 1 });
                }
                if !a.is_finite() {
                    return Err(Error::InvalidInput(format!("row {i}: non-finite coefficient")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `p`, starting with every non-lazy row active.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let mut active: Vec<bool> = p.constraints.iter().map(|c| !c.lazy).collect();
    solve_lp_with_active(p, &mut active)
}

/// Solves `p` with row generation over the lazy rows. `active` marks the
/// rows in the working LP and grows as violated lazy rows are found, so a
/// caller solving a family of related problems can carry it along.
pub fn solve_lp_with_active(p: &LpProblem, active: &mut [bool]) -> Result<LpSolution> {
    WarmLp::solve(p, active).map(|(sol, _)| sol)
}

fn check_active(p: &LpProblem, active: &mut [bool]) -> Result<()> {
    p.validate()?;
    if active.len() != p.constraints.len() {
        return Err(Error::DimensionMismatch {
            expected: p.constraints.len(),
            found: active.len(),
        });
    }
    for (flag, c) in active.iter_mut().zip(&p.constraints) {
        if !c.lazy {
            *flag = true;
        }
    }
    Ok(())
}

/// Solver state kept after a solve so that the same problem can be
/// re-solved from the previous basis once its variable bounds change.
#[derive(Debug, Clone)]
pub struct WarmLp {
    tab: Tableau,
    /// Problem row behind each tableau row.
    rows: Vec<usize>,
    in_tab: Vec<bool>,
}

impl WarmLp {
    pub fn solve(p: &LpProblem, active: &mut [bool]) -> Result<(LpSolution, WarmLp)> {
        check_active(p, active)?;
        let rows: Vec<usize> = (0..p.constraints.len()).filter(|&i| active[i]).collect();
        let mut in_tab = vec![false; p.constraints.len()];
        for &i in &rows {
            in_tab[i] = true;
        }
        let refs: Vec<&Constraint> = rows.iter().map(|&i| &p.constraints[i]).collect();
        let mut tab = Tableau::build(p, &refs);
        let status = tab.solve_fresh();
        let mut warm = WarmLp { tab, rows, in_tab };
        let sol = warm.generate(p, active, status);
        Ok((sol, warm))
    }

    /// Re-solves after the bounds of `p` changed. The objective and rows
    /// must be those of the problem this state came from; rows marked in
    /// `active` since then are added first.
    pub fn resolve(&mut self, p: &LpProblem, active: &mut [bool]) -> Result<LpSolution> {
        check_active(p, active)?;
        if self.in_tab.len() != p.constraints.len() || self.tab.n_struct != p.num_vars() {
            return Err(Error::InvalidInput("warm start from a different problem".into()));
        }
        let mut dual_ok = true;
        for j in 0..p.num_vars() {
            if self.tab.lo[j] != p.lower[j] || self.tab.hi[j] != p.upper[j] {
                dual_ok &= self.tab.set_bounds(j, p.lower[j], p.upper[j]);
            }
        }
        let missing: Vec<usize> =
            (0..p.constraints.len()).filter(|&i| active[i] && !self.in_tab[i]).collect();
        self.add(p, &missing);
        let status = match dual_ok.then(|| self.tab.reoptimize()).flatten() {
            Some(s) => s,
            None => self.rebuild(p),
        };
        Ok(self.generate(p, active, status))
    }

    /// Rough heap size, for callers that keep many states around.
    pub fn approx_bytes(&self) -> usize {
        let t = &self.tab;
        8 * (t.t.len() + 6 * t.ncol) + 16 * t.a_cols.iter().map(Vec::len).sum::<usize>()
    }

    fn add(&mut self, p: &LpProblem, idx: &[usize]) {
        if idx.is_empty() {
            return;
        }
        let refs: Vec<&Constraint> = idx.iter().map(|&i| &p.constraints[i]).collect();
        self.tab.add_rows(&refs);
        for &i in idx {
            self.in_tab[i] = true;
            self.rows.push(i);
        }
    }

    fn rebuild(&mut self, p: &LpProblem) -> LpStatus {
        let refs: Vec<&Constraint> = self.rows.iter().map(|&i| &p.constraints[i]).collect();
        self.tab = Tableau::build(p, &refs);
        self.tab.solve_fresh()
    }

    fn generate(&mut self, p: &LpProblem, active: &mut [bool], mut status: LpStatus) -> LpSolution {
        let n = p.num_vars();
        loop {
            let new: Vec<usize> = match status {
                LpStatus::Optimal => {
                    let x = &self.tab.x[..n];
                    (0..p.constraints.len())
                        .filter(|&i| !self.in_tab[i] && p.constraints[i].violation(x) > FEAS_TOL)
                        .collect()
                }
                LpStatus::Unbounded => (0..p.constraints.len()).filter(|&i| !self.in_tab[i]).collect(),
                _ => Vec::new(),
            };
            if new.is_empty() {
                return self.tab.finish(p, status);
            }
            for &i in &new {
                active[i] = true;
            }
            self.add(p, &new);
            status = match self.tab.reoptimize() {
                Some(s) => s,
                None => self.rebuild(p),
            };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

#[derive(Debug, Clone)]
struct Tableau {
    m: usize,
    ncol: usize,
    n_struct: usize,
    /// Row-major `m × ncol` matrix `B⁻¹A`.
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Initial basic column of each row and its sign; `B⁻¹e_i = sign·T[:, col]`.
    init_basis: Vec<(usize, f64)>,
    b: Vec<f64>,
    /// Columns of the original rows in sparse form.
    a_cols: Vec<Vec<(usize, f64)>>,
    d: Vec<f64>,
    /// Phase 2 costs in minimization form.
    cost: Vec<f64>,
    artificial: Vec<bool>,
    since_refactor: usize,
}

impl Tableau {
    fn build(p: &LpProblem, rows: &[&Constraint]) -> Tableau {
        let n = p.num_vars();
        let m = rows.len();
        let mut x = vec![0.0; n];
        for j in 0..n {
            x[j] = if p.lower[j].is_finite() {
                p.lower[j]
            } else if p.upper[j].is_finite() {
                p.upper[j]
            } else {
                0.0
            };
        }

        // Columns: structurals, one slack per row, then artificials.
        let mut lo: Vec<f64> = p.lower.clone();
        let mut hi: Vec<f64> = p.upper.clone();
        let mut a_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    a_cols[j].push((i, a));
                }
            }
        }
        let mut residual = vec![0.0; m];
        for (i, row) in rows.iter().enumerate() {
            residual[i] = row.rhs - row.activity(&x);
            let (slo, shi) = slack_bounds(row.relation);
            lo.push(slo);
            hi.push(shi);
            a_cols.push(vec![(i, 1.0)]);
        }
        let mut init_basis = Vec::with_capacity(m);
        let mut n_art = 0;
        for i in 0..m {
            let slack = n + i;
            let r = residual[i];
            if r >= lo[slack] - FEAS_TOL && r <= hi[slack] + FEAS_TOL {
                init_basis.push((slack, 1.0));
            } else {
                let col = n + m + n_art;
                n_art += 1;
                let sign = if r >= 0.0 { 1.0 } else { -1.0 };
                lo.push(0.0);
                hi.push(f64::INFINITY);
                a_cols.push(vec![(i, sign)]);
                init_basis.push((col, sign));
            }
        }
        let ncol = n + m + n_art;
        x.resize(ncol, 0.0);

        let mut t = vec![0.0; m * ncol];
        for (j, col) in a_cols.iter().enumerate() {
            for &(i, a) in col {
                t[i * ncol + j] += a * init_basis[i].1;
            }
        }
        let mut is_basic = vec![false; ncol];
        let mut basis = Vec::with_capacity(m);
        for (i, &(col, sign)) in init_basis.iter().enumerate() {
            basis.push(col);
            is_basic[col] = true;
            x[col] = sign * residual[i];
        }
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; ncol];
        for j in 0..n {
            cost[j] = sign * p.objective[j];
        }
        let mut artificial = vec![false; ncol];
        artificial[n + m..].iter_mut().for_each(|a| *a = true);

        Tableau {
            m,
            ncol,
            n_struct: n,
            t,
            lo,
            hi,
            x,
            basis,
            is_basic,
            init_basis,
            b: rows.iter().map(|r| r.rhs).collect(),
            a_cols,
            d: vec![0.0; ncol],
            cost,
            artificial,
            since_refactor: 0,
        }
    }

    fn max_iter(&self) -> usize {
        50_000 + 200 * (self.m + self.ncol)
    }

    /// Two-phase primal simplex from the slack/artificial basis.
    fn solve_fresh(&mut self) -> LpStatus {
        let max_iter = self.max_iter();
        if self.artificial.iter().any(|a| *a) {
            let cost: Vec<f64> = self.artificial.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
            let mut retried = false;
            loop {
                match self.run(&cost, Phase::One, max_iter) {
                    LpStatus::Optimal => {}
                    status => return status,
                }
                self.recompute_basics();
                let infeas: f64 =
                    (0..self.ncol).filter(|&j| self.artificial[j]).map(|j| self.x[j].abs()).sum();
                if infeas <= FEAS_TOL {
                    break;
                }
                // Rule out accumulated round-off before reporting infeasibility.
                if retried || self.since_refactor == 0 || !self.refactor() {
                    return LpStatus::Infeasible;
                }
                retried = true;
            }
            for j in 0..self.ncol {
                if self.artificial[j] {
                    self.hi[j] = 0.0;
                    if !self.is_basic[j] {
                        self.x[j] = 0.0;
                    }
                }
            }
        }
        let cost = self.cost.clone();
        let status = self.run(&cost, Phase::Two, max_iter);
        self.recompute_basics();
        self.settle(status).unwrap_or(LpStatus::IterationLimit)
    }

    /// Re-optimizes after bound changes or added rows. `None` means the
    /// current basis is unusable and the caller should start over.
    fn reoptimize(&mut self) -> Option<LpStatus> {
        let mut status = self.restore()?;
        if status == LpStatus::Infeasible && self.since_refactor > 0 {
            if !self.refactor() {
                return None;
            }
            status = self.restore()?;
        }
        self.settle(status)
    }

    /// Primal simplex if the basis is primal feasible, otherwise dual
    /// simplex followed by a primal cleanup. Reduced costs of the wrong sign
    /// are shifted to zero for the dual phase.
    fn restore(&mut self) -> Option<LpStatus> {
        let cost = self.cost.clone();
        let max_iter = self.max_iter();
        self.reduced_costs(&cost);
        if self.primal_infeasibility() <= FEAS_TOL {
            return Some(self.run(&cost, Phase::Two, max_iter));
        }
        let mut shifted = cost.clone();
        for j in 0..self.ncol {
            if !self.dual_ok(j) {
                shifted[j] -= self.d[j];
                self.d[j] = 0.0;
            }
        }
        match self.dual(&shifted, max_iter) {
            LpStatus::Optimal => Some(self.run(&cost, Phase::Two, max_iter)),
            status => Some(status),
        }
    }

    /// Refactorizes while the optimal point fails the original rows.
    fn settle(&mut self, mut status: LpStatus) -> Option<LpStatus> {
        for _ in 0..3 {
            if status != LpStatus::Optimal || self.residual() <= RESIDUAL_TOL {
                return Some(status);
            }
            if !self.refactor() {
                return None;
            }
            status = self.restore()?;
        }
        Some(status)
    }

    fn finish(&self, p: &LpProblem, status: LpStatus) -> LpSolution {
        let x: Vec<f64> = self.x[..self.n_struct].to_vec();
        let objective = match status {
            LpStatus::Optimal => p.objective_value(&x),
            LpStatus::Unbounded => match p.sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
            _ => f64::NAN,
        };
        LpSolution { status, x, objective }
    }

    /// Moves variable `j` to new bounds. A nonbasic variable goes to the
    /// bound its reduced cost prefers; returns false when that bound is
    /// infinite, i.e. the basis is no longer dual feasible.
    fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> bool {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.is_basic[j] {
            return true;
        }
        let dj = self.d[j];
        let mut target = if dj > DUAL_TOL {
            lo
        } else if dj < -DUAL_TOL {
            hi
        } else {
            self.x[j].max(lo).min(hi)
        };
        let mut ok = true;
        if !target.is_finite() {
            ok = false;
            target = if lo.is_finite() {
                lo
            } else if hi.is_finite() {
                hi
            } else {
                0.0
            };
        }
        let delta = target - self.x[j];
        if delta != 0.0 {
            for r in 0..self.m {
                let trj = self.t[r * self.ncol + j];
                if trj != 0.0 {
                    self.x[self.basis[r]] -= trj * delta;
                }
            }
            self.x[j] = target;
        }
        ok
    }

    /// Appends rows with their slacks basic. The reduced costs of existing
    /// columns do not change.
    fn add_rows(&mut self, rows: &[&Constraint]) {
        let (m, old) = (self.m, self.ncol);
        let k = rows.len();
        let ncol = old + k;
        let mut t = vec![0.0; (m + k) * ncol];
        for r in 0..m {
            t[r * ncol..r * ncol + old].copy_from_slice(&self.t[r * old..(r + 1) * old]);
        }
        for (q, row) in rows.iter().enumerate() {
            let i = m + q;
            let mut v = vec![0.0; ncol];
            for &(j, a) in &row.coeffs {
                v[j] += a;
            }
            for r in 0..m {
                let c = v[self.basis[r]];
                if c != 0.0 {
                    for (vj, tj) in v[..old].iter_mut().zip(&self.t[r * old..(r + 1) * old]) {
                        *vj -= c * tj;
                    }
                }
            }
            v[old + q] = 1.0;
            t[i * ncol..(i + 1) * ncol].copy_from_slice(&v);

            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    self.a_cols[j].push((i, a));
                }
            }
            let value = row.rhs - row.activity(&self.x[..self.n_struct]);
            let (slo, shi) = slack_bounds(row.relation);
            self.lo.push(slo);
            self.hi.push(shi);
            self.x.push(value);
            self.is_basic.push(true);
            self.basis.push(old + q);
            self.init_basis.push((old + q, 1.0));
            self.b.push(row.rhs);
            self.a_cols.push(vec![(i, 1.0)]);
            self.d.push(0.0);
            self.cost.push(0.0);
            self.artificial.push(false);
        }
        self.t = t;
        self.m = m + k;
        self.ncol = ncol;
    }

    fn reduced_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.ncol..(r + 1) * self.ncol];
                for (dj, tj) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tj;
                }
            }
        }
        for r in 0..self.m {
            self.d[self.basis[r]] = 0.0;
        }
    }

    /// Basic values from scratch: `x_B = B⁻¹ (b − N x_N)`.
    fn recompute_basics(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.ncol {
            if !self.is_basic[j] && self.x[j] != 0.0 {
                for &(i, a) in &self.a_cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        for r in 0..self.m {
            let mut v = 0.0;
            for (i, &(col, sign)) in self.init_basis.iter().enumerate() {
                if rhs[i] != 0.0 {
                    v += sign * self.t[r * self.ncol + col] * rhs[i];
                }
            }
            self.x[self.basis[r]] = v;
        }
    }

    /// Rebuilds `B⁻¹A` from the current basis. Basic columns with a single
    /// entry (slacks, artificials) are eliminated directly, so only the
    /// remaining `k × k` kernel is factorized.
    fn refactor(&mut self) -> bool {
        let (m, ncol) = (self.m, self.ncol);
        // Row covered by each single-entry basic column: (basis position, coefficient).
        let mut unit: Vec<Option<(usize, f64)>> = vec![None; m];
        let mut kernel_cols = Vec::new();
        for (r, &col) in self.basis.iter().enumerate() {
            match self.a_cols[col].as_slice() {
                &[(i, a)] if unit[i].is_none() && a != 0.0 => unit[i] = Some((r, a)),
                _ => kernel_cols.push(r),
            }
        }
        let kernel_rows: Vec<usize> = (0..m).filter(|&i| unit[i].is_none()).collect();
        let k = kernel_cols.len();
        if kernel_rows.len() != k {
            return false;
        }
        let mut row_pos = vec![usize::MAX; m];
        for (kk, &i) in kernel_rows.iter().enumerate() {
            row_pos[i] = kk;
        }
        let mut bm = DMatrix::<f64>::zeros(k, k);
        for (s, &r) in kernel_cols.iter().enumerate() {
            for &(i, a) in &self.a_cols[self.basis[r]] {
                if row_pos[i] != usize::MAX {
                    bm[(row_pos[i], s)] += a;
                }
            }
        }
        let Some(inv) = bm.lu().try_inverse() else {
            return false;
        };
        if inv.iter().any(|v| !v.is_finite()) {
            return false;
        }

        // Kernel rows: T_S = K⁻¹ A[K, :]. Unit rows start as A[i, :] / a_i.
        let mut t = vec![0.0; m * ncol];
        for (j, col) in self.a_cols.iter().enumerate() {
            for &(i, a) in col {
                match unit[i] {
                    Some((r, piv)) => t[r * ncol + j] += a / piv,
                    None => {
                        let inv_col = inv.column(row_pos[i]);
                        for (s, v) in inv_col.iter().enumerate() {
                            if *v != 0.0 {
                                t[kernel_cols[s] * ncol + j] += v * a;
                            }
                        }
                    }
                }
            }
        }
        // Unit rows: subtract the kernel columns' contribution.
        for &rs in &kernel_cols {
            let (before, rest) = t.split_at_mut(rs * ncol);
            let (srow, after) = rest.split_at_mut(ncol);
            let nz: Vec<usize> = (0..ncol).filter(|&j| srow[j] != 0.0).collect();
            for &(i, a) in &self.a_cols[self.basis[rs]] {
                let Some((ru, piv)) = unit[i] else { continue };
                let f = a / piv;
                let row = if ru < rs {
                    &mut before[ru * ncol..(ru + 1) * ncol]
                } else {
                    let off = (ru - rs - 1) * ncol;
                    &mut after[off..off + ncol]
                };
                for &j in &nz {
                    row[j] -= f * srow[j];
                }
            }
        }
        for (r, &col) in self.basis.iter().enumerate() {
            for rr in 0..m {
                t[rr * ncol + col] = if rr == r { 1.0 } else { 0.0 };
            }
        }
        self.t = t;
        self.since_refactor = 0;
        self.recompute_basics();
        true
    }

    /// Largest scaled violation of `A x = b` over all columns.
    fn residual(&self) -> f64 {
        let mut r: Vec<f64> = self.b.iter().map(|b| -b).collect();
        for (j, col) in self.a_cols.iter().enumerate() {
            let xj = self.x[j];
            if xj != 0.0 {
                for &(i, a) in col {
                    r[i] += a * xj;
                }
            }
        }
        r.iter()
            .zip(&self.b)
            .map(|(ri, bi)| ri.abs() / (1.0 + bi.abs()))
            .fold(0.0, f64::max)
    }

    fn primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&c| (self.lo[c] - self.x[c]).max(self.x[c] - self.hi[c]))
            .fold(0.0, f64::max)
    }

    fn dual_ok(&self, j: usize) -> bool {
        if self.is_basic[j] || self.lo[j] == self.hi[j] {
            return true;
        }
        let dj = self.d[j];
        !(dj < -DUAL_FEAS_TOL && self.x[j] < self.hi[j] || dj > DUAL_FEAS_TOL && self.x[j] > self.lo[j])
    }

    fn after_pivot(&mut self, cost: &[f64]) {
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY && self.refactor() {
            self.reduced_costs(cost);
        }
    }

    /// Dual simplex: the leaving row is the basic variable farthest outside
    /// its bounds, the entering column passes a Harris ratio test on the
    /// reduced costs.
    fn dual(&mut self, cost: &[f64], max_iter: usize) -> LpStatus {
        let ncol = self.ncol;
        for _ in 0..max_iter {
            let mut leave = None;
            let mut worst = FEAS_TOL;
            for r in 0..self.m {
                let c = self.basis[r];
                let v = (self.lo[c] - self.x[c]).max(self.x[c] - self.hi[c]);
                if v > worst {
                    worst = v;
                    leave = Some(r);
                }
            }
            let Some(r) = leave else {
                return LpStatus::Optimal;
            };
            let out = self.basis[r];
            let (target, up) = if self.x[out] < self.lo[out] {
                (self.lo[out], true)
            } else {
                (self.hi[out], false)
            };
            let row = &self.t[r * ncol..(r + 1) * ncol];
            // Pivot magnitude of column j if moving it can push x_out toward its bound.
            let eligible = |j: usize, tol: f64| -> Option<f64> {
                if self.is_basic[j] || self.lo[j] == self.hi[j] {
                    return None;
                }
                let a = row[j];
                if a.abs() <= tol {
                    return None;
                }
                let increase = if up { a < 0.0 } else { a > 0.0 };
                let free = if increase { self.x[j] < self.hi[j] } else { self.x[j] > self.lo[j] };
                free.then_some(a.abs())
            };
            let mut enter: Option<(usize, f64)> = None;
            for tol in [PIVOT_TOL, TINY_PIVOT] {
                let mut theta = f64::INFINITY;
                for j in 0..ncol {
                    if let Some(a) = eligible(j, tol) {
                        theta = theta.min((self.d[j].abs() + DUAL_TOL) / a);
                    }
                }
                for j in 0..ncol {
                    if let Some(a) = eligible(j, tol) {
                        if self.d[j].abs() / a <= theta && enter.is_none_or(|(_, b)| a > b) {
                            enter = Some((j, a));
                        }
                    }
                }
                if enter.is_some() {
                    break;
                }
            }
            let Some((q, alpha)) = enter else {
                return LpStatus::Infeasible;
            };
            if alpha <= PIVOT_TOL {
                self.since_refactor = REFACTOR_EVERY;
            }
            let step = (self.x[out] - target) / row[q];
            for rr in 0..self.m {
                let tq = self.t[rr * ncol + q];
                if tq != 0.0 {
                    self.x[self.basis[rr]] -= tq * step;
                }
            }
            self.x[q] += step;
            self.x[out] = target;
            self.pivot(r, q);
            self.is_basic[out] = false;
            self.is_basic[q] = true;
            self.basis[r] = q;
            self.after_pivot(cost);
        }
        LpStatus::IterationLimit
    }

    /// Harris ratio test for moving column `q` in direction `dir`: the
    /// largest step keeping every basic variable within `HARRIS_TOL` of its
    /// bounds, leaving on the largest pivot whose exact ratio fits. Returns
    /// the step, the leaving row with the bound it lands on, and the pivot
    /// magnitude (infinite for a bound flip).
    fn ratio_test(&self, q: usize, dir: f64, tiny: f64) -> (f64, Option<(usize, f64)>, f64) {
        let ratio = |r: usize, slack: f64| -> Option<(f64, f64)> {
            let alpha = dir * self.t[r * self.ncol + q];
            let bcol = self.basis[r];
            if alpha > tiny && self.lo[bcol] > f64::NEG_INFINITY {
                Some(((self.x[bcol] - self.lo[bcol] + slack) / alpha, self.lo[bcol]))
            } else if alpha < -tiny && self.hi[bcol] < f64::INFINITY {
                Some(((self.hi[bcol] - self.x[bcol] + slack) / -alpha, self.hi[bcol]))
            } else {
                None
            }
        };
        let flip = self.hi[q] - self.lo[q];
        let mut theta = f64::INFINITY;
        for r in 0..self.m {
            if let Some((limit, _)) = ratio(r, HARRIS_TOL) {
                theta = theta.min(limit);
            }
        }
        if theta >= flip {
            return (flip, None, f64::INFINITY);
        }
        let mut step = flip;
        let mut leave: Option<(usize, f64)> = None;
        let mut best_alpha = 0.0;
        for r in 0..self.m {
            let Some((limit, bound)) = ratio(r, 0.0) else { continue };
            if limit > theta {
                continue;
            }
            let alpha = self.t[r * self.ncol + q].abs();
            let better = alpha > best_alpha
                || (alpha == best_alpha
                    && leave.is_some_and(|(lr, _)| self.basis[r] < self.basis[lr]));
            if better {
                best_alpha = alpha;
                step = limit.max(0.0);
                leave = Some((r, bound));
            }
        }
        (step, leave, best_alpha)
    }

    fn run(&mut self, cost: &[f64], phase: Phase, max_iter: usize) -> LpStatus {
        self.reduced_costs(cost);
        let mut fresh = true;
        let mut banned = vec![false; self.ncol];
        for _ in 0..max_iter {
            // Lowest-index improving column, skipping columns whose only
            // pivot is tiny as long as a stable alternative exists.
            let mut chosen = None;
            let mut fallback: Option<(usize, f64, (f64, Option<(usize, f64)>, f64))> = None;
            let mut tried = 0;
            for j in 0..self.ncol {
                if self.is_basic[j] || self.lo[j] == self.hi[j] || banned[j] {
                    continue;
                }
                let dj = self.d[j];
                let dir = if dj < -DUAL_TOL && self.x[j] < self.hi[j] {
                    1.0
                } else if dj > DUAL_TOL && self.x[j] > self.lo[j] {
                    -1.0
                } else {
                    continue;
                };
                let rt = self.ratio_test(j, dir, PIVOT_TOL);
                if rt.2 >= STABLE_PIVOT {
                    chosen = Some((j, dir, rt));
                    break;
                }
                if fallback.as_ref().is_none_or(|f| rt.2 > f.2 .2) {
                    fallback = Some((j, dir, rt));
                }
                tried += 1;
                if tried >= MAX_REJECTED {
                    break;
                }
            }
            let Some((q, dir, (step, leave, _))) = chosen.or(fallback) else {
                if fresh {
                    return LpStatus::Optimal;
                }
                // Confirm optimality against reduced costs computed from scratch.
                self.reduced_costs(cost);
                fresh = true;
                continue;
            };
            fresh = false;
            let (mut step, mut leave) = (step, leave);
            if step == f64::INFINITY {
                // Rule out round-off before accepting a ray: refactorize, then
                // look for blocking rows among entries below the pivot tolerance.
                if self.since_refactor > 0 && self.refactor() {
                    self.reduced_costs(cost);
                    continue;
                }
                let rt = self.ratio_test(q, dir, TINY_PIVOT);
                if rt.0 == f64::INFINITY {
                    if phase == Phase::Two {
                        return LpStatus::Unbounded;
                    }
                    // Phase 1 is bounded below by zero.
                    banned[q] = true;
                    continue;
                }
                (step, leave) = (rt.0, rt.1);
                self.since_refactor = REFACTOR_EVERY;
            }
            for r in 0..self.m {
                let tq = self.t[r * self.ncol + q];
                if tq != 0.0 {
                    self.x[self.basis[r]] -= dir * step * tq;
                }
            }
            self.x[q] += dir * step;

            match leave {
                None => {
                    // Bound flip.
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, bound)) => {
                    let out = self.basis[r];
                    self.x[out] = bound;
                    self.pivot(r, q);
                    self.is_basic[out] = false;
                    self.is_basic[q] = true;
                    self.basis[r] = q;
                    self.after_pivot(cost);
                    banned.iter_mut().for_each(|b| *b = false);
                }
            }
        }
        LpStatus::IterationLimit
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncol = self.ncol;
        let piv = self.t[r * ncol + q];
        {
            let row = &mut self.t[r * ncol..(r + 1) * ncol];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * ncol);
        let (prow, after) = rest.split_at_mut(ncol);
        let nz: Vec<usize> = (0..ncol).filter(|&j| prow[j] != 0.0).collect();
        for chunk in [before, after] {
            for row in chunk.chunks_exact_mut(ncol) {
                let f = row[q];
                if f != 0.0 {
                    for &j in &nz {
                        row[j] -= f * prow[j];
                    }
                    row[q] = 0.0;
                }
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for &j in &nz {
                self.d[j] -= f * prow[j];
            }
            self.d[q] = 0.0;
        }
    }
}

fn slack_bounds(relation: Relation) -> (f64, f64) {
    match relation {
        Relation::Le => (0.0, f64::INFINITY),
        Relation::Ge => (f64::NEG_INFINITY, 0.0),
        Relation::Eq => (0.0, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_max() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0]);
        p.add(Constraint::dense(&[1.0], Relation::Le, 3.0));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_covering_rows() {
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0, 1.0]);
        p.add(Constraint::dense(&[1.0, 2.0], Relation::Ge, 2.0));
        p.add(Constraint::dense(&[2.0, 1.0], Relation::Ge, 2.0));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!((s.x[1] - 2.0 / 3.0).abs() < 1e-9);
        assert!((s.objective - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0, 0.0]);
        p.add(Constraint::dense(&[1.0, 1.0], Relation::Le, 1.0));
        p.add(Constraint::dense(&[1.0, 1.0], Relation::Ge, 2.0));
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);

        let mut q = LpProblem::new(Sense::Minimize, vec![1.0]);
        q.set_bounds(0, 0.0, 1.0);
        q.add(Constraint::dense(&[1.0], Relation::Eq, 2.0));
        assert_eq!(solve_lp(&q).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 1.0]);
        p.add(Constraint::dense(&[1.0, -1.0], Relation::Le, 1.0));
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_negative_bounds() {
        // min |x - 2| over free x, written with slack t >= x - 2, t >= 2 - x.
        let mut p = LpProblem::new(Sense::Minimize, vec![0.0, 1.0]);
        p.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        p.add(Constraint::dense(&[-1.0, 1.0], Relation::Ge, -2.0));
        p.add(Constraint::dense(&[1.0, 1.0], Relation::Ge, 2.0));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.objective.abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9);

        let mut q = LpProblem::new(Sense::Minimize, vec![1.0]);
        q.set_bounds(0, -5.0, -1.0);
        let s = solve_lp(&q).unwrap();
        assert!((s.x[0] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn equality_rows_and_redundancy() {
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0, 2.0, 3.0]);
        p.add(Constraint::dense(&[1.0, 1.0, 1.0], Relation::Eq, 1.0));
        p.add(Constraint::dense(&[2.0, 2.0, 2.0], Relation::Eq, 2.0));
        p.add(Constraint::dense(&[0.0, 1.0, 0.0], Relation::Ge, 0.25));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.25).abs() < 1e-9);
    }

    #[test]
    fn lazy_rows_are_enforced() {
        let mut p = LpProblem::new(Sense::Maximize, vec![1.0, 1.0]);
        p.set_bounds(0, 0.0, 10.0).set_bounds(1, 0.0, 10.0);
        p.add(Constraint::dense(&[1.0, 2.0], Relation::Le, 4.0).lazy());
        p.add(Constraint::dense(&[3.0, 1.0], Relation::Le, 6.0).lazy());
        let s = solve_lp(&p).unwrap();
        let mut eager = p.clone();
        eager.constraints.iter_mut().for_each(|c| c.lazy = false);
        let e = solve_lp(&eager).unwrap();
        assert!((s.objective - e.objective).abs() < 1e-9);
        assert!(p.max_violation(&s.x) < 1e-7);
    }

    #[test]
    fn rejects_malformed() {
        let mut p = LpProblem::new(Sense::Minimize, vec![1.0]);
        p.add(Constraint::new(vec![(3, 1.0)], Relation::Le, 1.0));
        assert!(matches!(solve_lp(&p), Err(Error::DimensionMismatch { .. })));
        let mut q = LpProblem::new(Sense::Minimize, vec![1.0]);
        q.lower = vec![0.0, 0.0];
        assert!(solve_lp(&q).is_err());
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example for Dantzig's rule (Beale).
        let mut p = LpProblem::new(Sense::Minimize, vec![-0.75, 150.0, -0.02, 6.0]);
        p.add(Constraint::dense(&[0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0));
        p.add(Constraint::dense(&[0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0));
        p.add(Constraint::dense(&[0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9);
    }

    #[test]
    fn warm_resolve_matches_fresh_solve() {
        // Small transportation-like LP with a lazy row and varying bounds.
        let mut p = LpProblem::new(Sense::Minimize, vec![3.0, 1.0, 4.0, 1.5, 2.0]);
        p.add(Constraint::dense(&[1.0, 1.0, 0.0, 0.0, 0.0], Relation::Ge, 2.0));
        p.add(Constraint::dense(&[0.0, 1.0, 1.0, 1.0, 0.0], Relation::Ge, 3.0));
        p.add(Constraint::dense(&[1.0, 0.0, 0.0, 1.0, 1.0], Relation::Eq, 2.5));
        p.add(Constraint::dense(&[0.0, 1.0, 0.0, 1.0, 0.0], Relation::Le, 2.0).lazy());
        for j in 0..5 {
            p.set_bounds(j, 0.0, 3.0);
        }
        let mut active: Vec<bool> = p.constraints.iter().map(|c| !c.lazy).collect();
        let (first, mut warm) = WarmLp::solve(&p, &mut active).unwrap();
        assert_eq!(first.status, LpStatus::Optimal);
        assert!(p.max_violation(&first.x) < 1e-9);

        let changes = [(1, 0.0, 0.5), (3, 1.0, 1.0), (0, 0.0, 0.0), (2, 0.0, 0.0)];
        for (j, lo, hi) in changes {
            p.set_bounds(j, lo, hi);
            let w = warm.resolve(&p, &mut active).unwrap();
            let f = solve_lp(&p).unwrap();
            assert_eq!(w.status, f.status, "after fixing {j}");
            if f.is_optimal() {
                assert!((w.objective - f.objective).abs() < 1e-9, "{} vs {}", w.objective, f.objective);
                assert!(p.max_violation(&w.x) < 1e-7);
            }
        }
    }
}
