use super::scale;
use crate::cost::{
    lagrangian_value, Bounds, Component, DualVector, MixedSolution, PureCandidate,
};
use crate::error::{Error, Result};
use crate::lpsolve::{solve_lp, Constraint, LpProblem, LpStatus, Relation, Sense};

/// Probabilities below this are dropped from a recovered mixture.
const SUPPORT_TOL: f64 = 1e-12;

/// Closed-form two-point mixture for a single constraint.
///
/// `lower` must have risk at least `V` and `upper` at most `V`. The returned
/// mixture meets the bound with equality, or puts all mass on `lower` when
/// both risks coincide with `V`. The dual is left at zero; callers that know
/// `λ*` overwrite it.
pub fn recover_mixture_scalar<P: Clone>(
    lower: &PureCandidate<P>,
    upper: &PureCandidate<P>,
    v: &Bounds,
) -> Result<MixedSolution<P>> {
    if lower.cost.k() != 1 || upper.cost.k() != 1 || v.k() != 1 {
        return Err(Error::InvalidInput("scalar recovery needs one constraint".into()));
    }
    let bound = v.v[0];
    let (cl, cu) = (lower.cost.c1(), upper.cost.c1());
    if cl < bound || cu > bound {
        return Err(Error::InvalidInput(format!(
            "bracket risks {cl} and {cu} do not straddle the bound {bound}"
        )));
    }
    let p_lower = if cl == cu {
        if cl != bound {
            return Err(Error::Degenerate(format!(
                "both candidates have risk {cl}, which differs from the bound {bound}"
            )));
        }
        1.0
    } else {
        (bound - cu) / (cl - cu)
    };
    MixedSolution::new(
        vec![
            Component { candidate: lower.clone(), probability: p_lower },
            Component { candidate: upper.clone(), probability: 1.0 - p_lower },
        ],
        DualVector::zeros(1),
        0.0,
    )
}

/// Mixture over a candidate pool for any number of constraints.
///
/// Only candidates whose Lagrangian at `lambda` is within `tol` (relative)
/// of the pool minimum are kept. Among those, the cheapest mixture that meets
/// every bound, with equality on constraints whose multiplier exceeds `tol`,
/// is found by LP. The LP optimum is a vertex, so at most `K + 1`
/// probabilities are positive.
pub fn recover_mixture_general<P: Clone>(
    pool: &[PureCandidate<P>],
    lambda: &DualVector,
    v: &Bounds,
    tol: f64,
) -> Result<MixedSolution<P>> {
    if pool.is_empty() {
        return Err(Error::InvalidInput("empty candidate pool".into()));
    }
    let k = v.k();
    let values = pool
        .iter()
        .map(|c| lagrangian_value(&c.cost, lambda, v))
        .collect::<Result<Vec<_>>>()?;
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let kept: Vec<usize> =
        (0..pool.len()).filter(|&j| values[j] - best <= tol * scale(best)).collect();

    let not_recoverable =
        || Error::MixtureNotRecoverable { pool: pool.iter().map(|c| c.cost.clone()).collect() };

    let mut lp = LpProblem::new(Sense::Minimize, kept.iter().map(|&j| pool[j].cost.c0).collect());
    for col in 0..kept.len() {
        lp.set_bounds(col, 0.0, 1.0);
    }
    lp.add(Constraint::new(
        (0..kept.len()).map(|col| (col, 1.0)).collect(),
        Relation::Eq,
        1.0,
    ));
    for i in 0..k {
        let rel = if lambda.lambda[i] > tol { Relation::Eq } else { Relation::Le };
        lp.add(Constraint::new(
            kept.iter().enumerate().map(|(col, &j)| (col, pool[j].cost.c_rest[i])).collect(),
            rel,
            v.v[i],
        ));
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(not_recoverable());
    }

    let mut components: Vec<Component<P>> = kept
        .iter()
        .zip(&sol.x)
        .filter(|&(_, &p)| p > SUPPORT_TOL)
        .map(|(&j, &p)| Component { candidate: pool[j].clone(), probability: p })
        .collect();
    if components.is_empty() {
        return Err(not_recoverable());
    }
    let total: f64 = components.iter().map(|c| c.probability).sum();
    for c in &mut components {
        c.probability /= total;
    }
    let mut mixed = MixedSolution::new(components, lambda.clone(), 0.0)?;
    mixed.gap_estimate = (mixed.aggregate.c0 - best).max(0.0);
    Ok(mixed)
}
