use mixedctrl::dual::{
    check_optimality, solve_dual_subgradient, solve_mixed_general, solve_mixed_scalar,
    ScalarDualConfig, SubgradientConfig,
};
use mixedctrl::lpsolve::{Constraint, LpProblem, Relation, Sense};
use mixedctrl::scenarios::FiniteSetOracle;
use mixedctrl::{Bounds, CostVector, Error};
use mixedctrl_testkit::dual::{exact_dual, mixed_optimum, pure_optimum};
use mixedctrl_testkit::lp::vertex_enumeration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(rng: &mut impl Rng, k: usize) -> (Vec<CostVector>, Bounds) {
    let n = rng.random_range(1..=8);
    let pts = (0..n)
        .map(|_| {
            CostVector::new(
                rng.random_range(0.0..100.0),
                (0..k).map(|_| rng.random_range(0.0..0.1)).collect(),
            )
            .unwrap()
        })
        .collect();
    let v = Bounds::new((0..k).map(|_| rng.random_range(0.01..0.09)).collect()).unwrap();
    (pts, v)
}

#[test]
fn scalar_solver_matches_exact_dual_and_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = ScalarDualConfig::default();
    let mut solved = 0;
    for case in 0..200 {
        let (pts, v) = random_set(&mut rng, 1);
        let pairs: Vec<(f64, f64)> = pts.iter().map(|c| (c.c0, c.c1())).collect();
        let o = FiniteSetOracle::new(pts, v.clone()).unwrap();
        match (exact_dual(&pairs, v.v[0]), solve_mixed_scalar(&o, &v, &cfg)) {
            (None, Err(Error::Infeasible(_))) => {}
            (Some((_, q)), Ok((res, m))) => {
                let hull = mixed_optimum(&pairs, v.v[0]).unwrap();
                let pure = pure_optimum(&pairs, v.v[0]).unwrap();
                assert!((m.aggregate.c0 - q).abs() < 1e-6, "case {case}: {} vs {q}", m.aggregate.c0);
                assert!((hull - q).abs() < 1e-6, "case {case}: strong duality");
                assert!(m.aggregate.c0 <= pure + 1e-9, "case {case}: mixed beats pure");
                assert!(m.components.len() <= 2);
                assert!(res.lower.cost.c1() >= res.upper.cost.c1());
                let r = check_optimality(&m, &v, &o, 1e-6);
                assert!(r.overall, "case {case}: {r:?}");
                solved += 1;
            }
            (a, b) => panic!("case {case}: oracle {a:?} vs solver {:?}", b.map(|x| x.0.lambda_star)),
        }
    }
    assert!(solved > 100);
}

#[test]
fn subgradient_agrees_with_bisection_for_one_constraint() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in 0..100 {
        let (pts, v) = random_set(&mut rng, 1);
        let o = FiniteSetOracle::new(pts, v.clone()).unwrap();
        let Ok(scalar) = mixedctrl::dual::solve_dual_scalar(&o, &v, &ScalarDualConfig::default())
        else {
            continue;
        };
        let sub = solve_dual_subgradient(&o, &v, &SubgradientConfig::default()).unwrap();
        assert!(sub.converged, "case {case}");
        let tol_lambda = ScalarDualConfig::default().tol_lambda;
        assert!(
            (sub.lambda.lambda[0] - scalar.lambda_star).abs() <= 10.0 * tol_lambda,
            "case {case}: {} vs {}",
            sub.lambda.lambda[0],
            scalar.lambda_star
        );
    }
}

/// Cheapest mixture over all points by vertex enumeration of the mixture LP.
fn hull_lp(pts: &[CostVector], v: &Bounds) -> Option<f64> {
    let mut lp = LpProblem::new(Sense::Minimize, pts.iter().map(|c| c.c0).collect());
    for j in 0..pts.len() {
        lp.set_bounds(j, 0.0, 1.0);
    }
    lp.add(Constraint::new((0..pts.len()).map(|j| (j, 1.0)).collect(), Relation::Eq, 1.0));
    for i in 0..v.k() {
        lp.add(Constraint::new(
            pts.iter().enumerate().map(|(j, c)| (j, c.c_rest[i])).collect(),
            Relation::Le,
            v.v[i],
        ));
    }
    vertex_enumeration(&lp).map(|(o, _)| o)
}

#[test]
fn two_constraint_mixtures_match_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut solved = 0;
    for case in 0..100 {
        let (pts, v) = random_set(&mut rng, 2);
        let o = FiniteSetOracle::new(pts.clone(), v.clone()).unwrap();
        let Some(best) = hull_lp(&pts, &v) else { continue };
        let (_, m) = solve_mixed_general(&o, &v, &SubgradientConfig::default())
            .unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert!((m.aggregate.c0 - best).abs() < 1e-6, "case {case}: {} vs {best}", m.aggregate.c0);
        assert!(m.components.len() <= 3);
        let r = check_optimality(&m, &v, &o, 1e-6);
        assert!(r.overall, "case {case}: {r:?}");
        solved += 1;
    }
    assert!(solved > 30);
}
