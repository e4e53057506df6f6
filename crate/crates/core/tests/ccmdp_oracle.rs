use mixedctrl::ccmdp::{evaluate_policy, evaluate_policy_with_mass, solve_penalized, MdpOracle};
use mixedctrl::dual::{check_optimality, solve_mixed_scalar, ScalarDualConfig};
use mixedctrl::Error;
use mixedctrl_testkit::dual::mixed_optimum;
use mixedctrl_testkit::mdp::TinyMdp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn dp_attains_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..50 {
        let tiny = TinyMdp::random(&mut rng, 4, 3, 3, 20_000);
        let mdp = tiny.to_mdp();
        let all = tiny.all_policies();
        let mut lambdas: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..50.0)).collect();
        lambdas.sort_by(f64::total_cmp);
        let mut prev_risk = f64::INFINITY;
        for &lambda in &lambdas {
            let sol = solve_penalized(&mdp, lambda).unwrap();
            let best = all.iter().map(|(_, (c0, c1))| c0 + lambda * c1).fold(f64::INFINITY, f64::min);
            let got = sol.eval.expected_cost + lambda * sol.eval.failure_prob;
            assert!((got - best).abs() < 1e-9, "case {case} λ={lambda}: {got} vs {best}");
            // Backward value and forward evaluation agree.
            assert!((sol.value - got).abs() < 1e-9, "case {case}");
            assert!(sol.eval.failure_prob <= prev_risk + 1e-9, "case {case}: risk rose with λ");
            prev_risk = sol.eval.failure_prob;
        }
    }
}

#[test]
fn forward_evaluation_matches_dense_reference_and_conserves_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for case in 0..30 {
        let tiny = TinyMdp::random(&mut rng, 4, 3, 3, 2_000);
        let mdp = tiny.to_mdp();
        for (choice, (c0, c1)) in tiny.all_policies() {
            let (r, mass) = evaluate_policy_with_mass(&mdp, &tiny.to_policy(&choice)).unwrap();
            assert!((r.expected_cost - c0).abs() < 1e-9, "case {case}");
            assert!((r.failure_prob - c1).abs() < 1e-12, "case {case}");
            for (alive, failed) in mass {
                assert!((alive + failed - 1.0).abs() < 1e-12, "case {case}");
            }
        }
    }
}

#[test]
fn mixed_solution_matches_policy_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut solved = 0;
    for case in 0..50 {
        let tiny = TinyMdp::random(&mut rng, 4, 3, 3, 20_000);
        let mdp = tiny.to_mdp();
        let pairs: Vec<(f64, f64)> = tiny.all_policies().into_iter().map(|(_, c)| c).collect();
        let v = rng.random_range(0.0..0.5);
        let oracle = MdpOracle::new(&mdp, v);
        match solve_mixed_scalar(&oracle, &oracle.bounds, &ScalarDualConfig::default()) {
            Ok((_, m)) => {
                let hull = mixed_optimum(&pairs, v).unwrap();
                assert!((m.aggregate.c0 - hull).abs() < 1e-6, "case {case}: {} vs {hull}", m.aggregate.c0);
                assert!(check_optimality(&m, &oracle.bounds, &oracle, 1e-6).overall, "case {case}");
                for c in &m.components {
                    let e = evaluate_policy(&mdp, &c.candidate.policy).unwrap();
                    assert_eq!(e.failure_prob, c.candidate.cost.c1());
                }
                solved += 1;
            }
            Err(Error::Infeasible(_)) => {
                assert!(pairs.iter().all(|p| p.1 > v), "case {case}");
            }
            Err(e) => panic!("case {case}: {e}"),
        }
    }
    assert!(solved > 20);
}
