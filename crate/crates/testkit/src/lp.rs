//! Vertex and assignment enumeration for small LPs and MILPs.
//!
//! These oracles only read the problem data; they share no code path with
//! the simplex or branch-and-bound solvers.

use mixedctrl::lpsolve::{Constraint, LpProblem, Relation, Sense};
use rand::Rng;

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` for (numerically) singular systems.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn dense(c: &Constraint, n: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    for &(j, a) in &c.coeffs {
        row[j] += a;
    }
    row
}

/// Best objective over all basic feasible solutions, or `None` when no vertex
/// is feasible. Every variable must have finite bounds so that the feasible
/// region is a polytope and the optimum sits at a vertex.
pub fn vertex_enumeration(p: &LpProblem) -> Option<(f64, Vec<f64>)> {
    let n = p.num_vars();
    assert!(
        p.lower.iter().chain(&p.upper).all(|b| b.is_finite()),
        "vertex enumeration needs finite bounds"
    );
    let mut eq_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut ineq_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &p.constraints {
        let row = dense(c, n);
        match c.relation {
            Relation::Eq => eq_rows.push((row, c.rhs)),
            _ => ineq_rows.push((row, c.rhs)),
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        ineq_rows.push((e.clone(), p.lower[j]));
        ineq_rows.push((e, p.upper[j]));
    }
    if eq_rows.len() > n {
        // Keep the enumeration simple: callers generate at most n equalities.
        return None;
    }
    let pick = n - eq_rows.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let sense = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for_each_subset(ineq_rows.len(), pick, &mut |subset| {
        let mut a: Vec<Vec<f64>> = eq_rows.iter().map(|(r, _)| r.clone()).collect();
        let mut b: Vec<f64> = eq_rows.iter().map(|(_, v)| *v).collect();
        for &i in subset {
            a.push(ineq_rows[i].0.clone());
            b.push(ineq_rows[i].1);
        }
        if let Some(x) = solve_square(a, b) {
            if p.max_violation(&x) <= 1e-9 {
                let obj = p.objective_value(&x);
                if best.as_ref().is_none_or(|(o, _)| sense * obj < sense * o) {
                    best = Some((obj, x));
                }
            }
        }
    });
    best
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Exhaustive MILP oracle: every 0/1 assignment of `binaries`, each completed
/// by vertex enumeration over the remaining variables with the binaries
/// substituted out.
pub fn assignment_enumeration(p: &LpProblem, binaries: &[usize]) -> Option<f64> {
    let sense = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let n = p.num_vars();
    let free: Vec<usize> = (0..n).filter(|j| !binaries.contains(j)).collect();
    let mut best: Option<f64> = None;
    for mask in 0u64..(1u64 << binaries.len()) {
        let mut value = vec![0.0; n];
        for (bit, &j) in binaries.iter().enumerate() {
            value[j] = ((mask >> bit) & 1) as f64;
        }
        let constant: f64 = binaries.iter().map(|&j| p.objective[j] * value[j]).sum();
        let mut reduced = LpProblem::new(p.sense, free.iter().map(|&j| p.objective[j]).collect());
        for (col, &j) in free.iter().enumerate() {
            reduced.set_bounds(col, p.lower[j], p.upper[j]);
        }
        let mut infeasible = false;
        for c in &p.constraints {
            let row = dense(c, n);
            let shift: f64 = binaries.iter().map(|&j| row[j] * value[j]).sum();
            let coeffs: Vec<f64> = free.iter().map(|&j| row[j]).collect();
            if coeffs.iter().all(|&a| a == 0.0) {
                infeasible |= !match c.relation {
                    Relation::Le => shift <= c.rhs + 1e-9,
                    Relation::Ge => shift >= c.rhs - 1e-9,
                    Relation::Eq => (shift - c.rhs).abs() <= 1e-9,
                };
                continue;
            }
            reduced.add(Constraint::dense(&coeffs, c.relation, c.rhs - shift));
        }
        if infeasible {
            continue;
        }
        let obj = if free.is_empty() {
            Some(constant)
        } else {
            vertex_enumeration(&reduced).map(|(o, _)| o + constant)
        };
        if let Some(obj) = obj {
            if best.is_none_or(|b| sense * obj < sense * b) {
                best = Some(obj);
            }
        }
    }
    best
}

/// Random bounded LP with `n` variables and `m` inequality rows.
pub fn random_lp(rng: &mut impl Rng, n: usize, m: usize) -> LpProblem {
    let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let obj = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut p = LpProblem::new(sense, obj);
    for j in 0..n {
        let lo = rng.random_range(-3.0..1.0);
        p.set_bounds(j, lo, lo + rng.random_range(1.0..6.0));
    }
    for _ in 0..m {
        let row: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.8) { rng.random_range(-4.0..4.0) } else { 0.0 })
            .collect();
        let rel = if rng.random_bool(0.7) { Relation::Le } else { Relation::Ge };
        p.add(Constraint::dense(&row, rel, rng.random_range(-4.0..6.0)));
    }
    p
}

/// Random MILP: `nb` binaries followed by `nc` bounded continuous variables.
pub fn random_milp(rng: &mut impl Rng, nb: usize, nc: usize, m: usize) -> (LpProblem, Vec<usize>) {
    let mut p = random_lp(rng, nb + nc, m);
    for j in 0..nb {
        p.set_bounds(j, 0.0, 1.0);
    }
    (p, (0..nb).collect())
}
