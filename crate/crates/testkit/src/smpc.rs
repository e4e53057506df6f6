//! Facet-selection enumeration for the chance-constrained control problem.

use mixedctrl::lpsolve::{solve_lp, Constraint, LpProblem, Relation, Sense};
use mixedctrl::smpc::{covariances, PwlCdf, SmpcModel};

/// Optimal `Σ|u|₁ + λ Σ δ` by trying every choice of one facet per
/// (obstacle, step) pair. Each choice is an LP in `(u, v, δ)` with the mean
/// states written out through the dynamics. `None` if every choice is
/// infeasible.
pub fn facet_enumeration(model: &SmpcModel, pwl: &PwlCdf, lambda: f64) -> Option<f64> {
    let (n, m, h) = (model.n(), model.m(), model.horizon);
    let covs = covariances(model);

    // x̄_{k+1} = A^k x0 + Σ_{j<k} A^{k-1-j} B u_j as (constant, coefficient on u).
    let nu = h * m;
    let mut affine: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::with_capacity(h + 1);
    let mut c: Vec<f64> = model.x0.iter().copied().collect();
    let mut g = vec![vec![0.0; nu]; n];
    affine.push((c.clone(), g.clone()));
    for k in 0..h {
        let mut c2 = vec![0.0; n];
        let mut g2 = vec![vec![0.0; nu]; n];
        for r in 0..n {
            for s in 0..n {
                let a = model.a[(r, s)];
                c2[r] += a * c[s];
                for col in 0..nu {
                    g2[r][col] += a * g[s][col];
                }
            }
            for d in 0..m {
                g2[r][k * m + d] += model.b[(r, d)];
            }
        }
        c = c2;
        g = g2;
        affine.push((c.clone(), g.clone()));
    }

    let pairs: Vec<(usize, usize)> = (0..model.obstacles.len())
        .flat_map(|i| (0..h).map(move |k| (i, k)))
        .collect();
    let n_delta = pairs.len();
    let n_var = 2 * nu + n_delta;
    let v0 = nu;
    let d0 = 2 * nu;

    let mut best: Option<f64> = None;
    let mut choice = vec![0usize; n_delta];
    loop {
        let mut obj = vec![0.0; n_var];
        obj[v0..d0].iter_mut().for_each(|x| *x = 1.0);
        obj[d0..].iter_mut().for_each(|x| *x = lambda);
        let mut lp = LpProblem::new(Sense::Minimize, obj);
        for j in 0..nu {
            lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
            lp.add(Constraint::new(vec![(v0 + j, 1.0), (j, -1.0)], Relation::Ge, 0.0));
            lp.add(Constraint::new(vec![(v0 + j, 1.0), (j, 1.0)], Relation::Ge, 0.0));
        }
        for k in 0..h {
            for r in 0..model.p.nrows() {
                let coeffs = (0..m).map(|d| (k * m + d, model.p[(r, d)])).collect();
                lp.add(Constraint::new(coeffs, Relation::Le, model.q[r]));
            }
        }
        if let Some(t) = &model.terminal {
            let (c, g) = &affine[h];
            for r in 0..n {
                let coeffs = (0..nu).map(|col| (col, g[r][col])).collect();
                lp.add(Constraint::new(coeffs, Relation::Eq, t[r] - c[r]));
            }
        }
        for (p, &(i, k)) in pairs.iter().enumerate() {
            let o = &model.obstacles[i];
            let j = choice[p];
            let hrow: Vec<f64> = (0..n).map(|d| o.h[(j, d)]).collect();
            let sigma = &covs[k + 1];
            let mut var = 0.0;
            for a in 0..n {
                for b in 0..n {
                    var += hrow[a] * sigma[(a, b)] * hrow[b];
                }
            }
            let s = var.max(0.0).sqrt();
            // y = (h x̄ − g) / s = (hc − g)/s + (h G / s) u
            let (c, gm) = &affine[k + 1];
            let hc: f64 = (0..n).map(|d| hrow[d] * c[d]).sum();
            let hg: Vec<f64> = (0..nu).map(|col| (0..n).map(|d| hrow[d] * gm[d][col]).sum()).collect();
            if s < 1e-12 {
                // Facet is certain: require clearance, no risk.
                let coeffs = (0..nu).map(|col| (col, hg[col])).collect();
                lp.add(Constraint::new(coeffs, Relation::Le, o.g[j] - hc - 1e-7));
                continue;
            }
            for &(a, b) in pwl.lines() {
                // δ ≥ a y + b
                let mut coeffs: Vec<(usize, f64)> = (0..nu).map(|col| (col, -a * hg[col] / s)).collect();
                coeffs.push((d0 + p, 1.0));
                lp.add(Constraint::new(coeffs, Relation::Ge, a * (hc - o.g[j]) / s + b));
            }
        }
        if let Ok(sol) = solve_lp(&lp) {
            if sol.is_optimal() && best.is_none_or(|b| sol.objective < b) {
                best = Some(sol.objective);
            }
        }

        // Next choice in mixed radix.
        let mut p = 0;
        loop {
            if p == n_delta {
                return best;
            }
            choice[p] += 1;
            if choice[p] < model.obstacles[pairs[p].0].rows() {
                break;
            }
            choice[p] = 0;
            p += 1;
        }
    }
}
