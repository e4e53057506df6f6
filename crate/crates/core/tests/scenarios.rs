use mixedctrl::ccmdp::{evaluate_policy, simulate, solve_penalized, Mdp, MdpOracle, Policy, NO_ACTION};
use mixedctrl::dual::{check_optimality, solve_mixed_scalar, ScalarDualConfig};
use mixedctrl::scenarios::*;
use mixedctrl::smpc::{estimate_risk_mc, PwlCdf, SmpcOracle};
use proptest::prelude::*;

/// Outcome rows sum to one and blocked cells fail in `layers`, checked
/// directly on the stage arrays.
fn assert_model_invariants(mdp: &Mdp, blocked: &[bool], layers: std::ops::RangeInclusive<usize>) {
    for k in 0..mdp.horizon() {
        let stage = mdp.stage(k);
        for o in 0..stage.n_outcomes() {
            let sum: f64 = stage.outcome(o).map(|(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-12, "stage {k} outcome {o} sums to {sum}");
        }
        for x in 0..stage.n_states() {
            for a in 0..stage.n_actions(x) {
                assert!(stage.cost(x, a) >= 0.0);
            }
        }
    }
    for k in layers {
        for (x, &b) in blocked.iter().enumerate() {
            assert!(!b || mdp.is_failure(k, x), "layer {k} cell {x}");
        }
    }
}

/// Aims each step at the first waypoint not yet passed in x, then at the
/// goal.
fn waypoint_policy(s: &GridScenario, mdp: &Mdp, waypoints: &[(usize, usize)]) -> Policy {
    let map = &s.map;
    let mut actions = Vec::new();
    for k in 0..mdp.horizon() {
        let layer = (0..map.n_cells())
            .map(|cell| {
                let (x, y) = map.coords(cell);
                if mdp.is_failure(k, cell) {
                    return NO_ACTION;
                }
                if s.in_goal(x, y) {
                    return 0;
                }
                let target = waypoints.iter().copied().find(|w| w.0 > x).unwrap_or(s.goal);
                let dist = |(dx, dy): (i64, i64)| {
                    let tx = (x as i64 + dx - target.0 as i64) as f64;
                    let ty = (y as i64 + dy - target.1 as i64) as f64;
                    tx.hypot(ty)
                };
                let acts = s.actions(x, y);
                let best = (0..acts.len())
                    .min_by(|&a, &b| dist(acts[a]).total_cmp(&dist(acts[b])))
                    .unwrap();
                best as u32
            })
            .collect();
        actions.push(layer);
    }
    Policy { actions }
}

#[test]
fn desk_grid_dp_beats_hand_crafted_paths() {
    let s = GridScenario::desk();
    let mdp = grid_scenario(&s).unwrap();
    assert_model_invariants(&mdp, s.map.blocked(), 0..=s.horizon);
    let routes: [&[(usize, usize)]; 3] = [&[], &[(11, 3), (19, 3)], &[(11, 27), (19, 27)]];
    for lambda in [0.0, 50.0, 700.0, 5000.0] {
        let dp = solve_penalized(&mdp, lambda).unwrap();
        let dp_value = dp.eval.expected_cost + lambda * dp.eval.failure_prob;
        for route in routes {
            let r = evaluate_policy(&mdp, &waypoint_policy(&s, &mdp, route)).unwrap();
            let value = r.expected_cost + lambda * r.failure_prob;
            assert!(dp_value <= value + 1e-9, "λ={lambda} route {route:?}: {dp_value} > {value}");
        }
    }
}

#[test]
fn desk_grid_mixture_is_exact_and_simulates_consistently() {
    let s = GridScenario::desk();
    let mdp = grid_scenario(&s).unwrap();
    let oracle = MdpOracle::new(&mdp, s.v);
    let (res, mixed) = solve_mixed_scalar(&oracle, &oracle.bounds, &ScalarDualConfig::default()).unwrap();
    assert!(res.lambda_star > 1.0);
    assert_eq!(mixed.components.len(), 2);
    assert!((mixed.aggregate.c1() - s.v).abs() < 1e-9);
    assert!(mixed.aggregate.c0 <= res.upper.cost.c0 + 1e-12);
    assert!(check_optimality(&mixed, &oracle.bounds, &oracle, 1e-7).overall);
    let sim = simulate(&mdp, &mixed, 11, 100_000).unwrap();
    assert!(sim.ci.0 <= s.v && s.v <= sim.ci.1, "{sim:?}");
}

#[test]
fn edl_default_mixes_two_landing_plans() {
    let s = EdlParams::default().scenario().unwrap();
    let mdp = edl_scenario(&s).unwrap();
    assert_model_invariants(&mdp, s.map.blocked(), s.horizon()..=s.horizon());
    let oracle = MdpOracle::new(&mdp, s.v);
    let (res, mixed) = solve_mixed_scalar(&oracle, &oracle.bounds, &ScalarDualConfig::default()).unwrap();
    assert!(res.lambda_star > 1.0);
    assert_eq!(mixed.components.len(), 2);
    assert!((mixed.aggregate.c1() - s.v).abs() < 1e-9);
    let [lo, hi] = [&mixed.components[0].candidate.cost, &mixed.components[1].candidate.cost];
    assert!(lo.c1() > s.v && hi.c1() < s.v && lo.c0 < hi.c0);
}

#[test]
fn map_files_load_into_scenarios() {
    let path = std::env::temp_dir().join(format!("mixedctrl-map-{}.txt", std::process::id()));
    let mut text = String::new();
    for y in 0..12 {
        let row: String = (0..12).map(|x| if x == 6 && y != 5 { '#' } else { '.' }).collect();
        text.push_str(&row);
        text.push('\n');
    }
    std::fs::write(&path, &text).unwrap();
    let map = GridMap::load(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(map.to_text(), text);
    let s = GridParams {
        horizon: 8,
        start: (1, 5),
        goal: (10, 5),
        goal_radius: 0.0,
        step_radius: 2.0,
        sigma: 0.0,
        ..Default::default()
    }
    .on(map);
    let mdp = grid_scenario(&s).unwrap();
    let sol = solve_penalized(&mdp, 100.0).unwrap();
    assert_eq!(sol.eval.failure_prob, 0.0);
    assert!((sol.eval.expected_cost - 9.0).abs() < 1e-12);
    assert!(GridMap::load(std::path::Path::new("/nonexistent/map.txt")).is_err());
}

#[test]
fn corridor_switches_from_the_gap_to_the_detour() {
    let params = CorridorParams::default();
    let model = corridor_model(&params).unwrap();
    let oracle = SmpcOracle::new(model.clone(), PwlCdf::default()).unwrap();
    let risky = oracle.plan(0.1).unwrap();
    let safe = oracle.plan(1000.0).unwrap();
    assert!(risky.total_risk > params.v && safe.total_risk <= params.v);
    assert!(risky.cost < safe.cost);
    let in_blocks = |x: &Vec<f64>| x[0] >= params.block_x.0 && x[0] <= params.block_x.1;
    assert!(risky.mean.iter().filter(|x| in_blocks(x)).all(|x| x[1].abs() < params.gap));
    assert!(safe.mean.iter().filter(|x| in_blocks(x)).any(|x| x[1].abs() > params.gap));
    for plan in [&risky, &safe] {
        let mc = estimate_risk_mc(&model, plan, 5, 100_000).unwrap();
        assert!(mc.ci.0 <= plan.total_risk, "{mc:?} vs {}", plan.total_risk);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_grids_build_valid_models(
        w in 4usize..9,
        h in 4usize..9,
        walls in proptest::collection::vec((0usize..9, 0usize..9), 0..6),
        sigma in 0.0f64..1.5,
        radius in 1.0f64..3.0,
    ) {
        let rects: Vec<CellRect> = walls
            .iter()
            .map(|&(x, y)| CellRect { x0: x % w, y0: y % h, x1: x % w, y1: y % h })
            .filter(|r| (r.x0, r.y0) != (0, 0) && (r.x0, r.y0) != (w - 1, h - 1))
            .collect();
        let map = GridMap::with_rects(w, h, &rects).unwrap();
        let s = GridParams {
            horizon: 4,
            start: (0, 0),
            goal: (w - 1, h - 1),
            step_radius: radius,
            sigma,
            ..Default::default()
        }
        .on(map);
        let mdp = grid_scenario(&s).unwrap();
        assert_model_invariants(&mdp, s.map.blocked(), 0..=4);
        let sol = solve_penalized(&mdp, 10.0).unwrap();
        prop_assert!(sol.eval.failure_prob >= 0.0 && sol.eval.failure_prob <= 1.0 + 1e-12);
    }
}
