use mixedctrl::{DualVector, LagrangianOracle};
use mixedctrl::smpc::*;
use mixedctrl_testkit::smpc::facet_enumeration;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(obstacles: Vec<Obstacle>, horizon: usize, target: (f64, f64)) -> SmpcModel {
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
        terminal: Some(DVector::from_vec(vec![target.0, target.1, 0.0, 0.0])),
        v: 0.01,
    }
}

fn random_box(rng: &mut impl Rng) -> Obstacle {
    let cx = rng.random_range(0.3..1.3);
    let cy = rng.random_range(-0.4..0.4);
    let w = rng.random_range(0.1..0.5);
    let h = rng.random_range(0.1..0.5);
    Obstacle::rectangle(4, (cx - w, cx + w), (cy - h, cy + h))
}

#[test]
fn covariance_matches_naive_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let raw = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let radius = raw.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let a = raw * (0.9 / radius);
        let l = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-0.5..0.5));
        let sigma_w = &l * l.transpose();
        let mut m = model(vec![], 10, (0.0, 0.0));
        m.a = a.clone();
        m.sigma_w = sigma_w.clone();
        m.terminal = None;
        let covs = covariances(&m);
        for k in 1..=11usize {
            // Σ_{x_k} = Σ_{j=0}^{k-2} A^j Σ_w (A^j)ᵀ
            let mut naive = DMatrix::zeros(4, 4);
            let mut aj = DMatrix::identity(4, 4);
            for _ in 0..k - 1 {
                naive += &aj * &sigma_w * aj.transpose();
                aj = &a * aj;
            }
            assert!((&covs[k - 1] - &naive).amax() < 1e-10, "k = {k}");
            assert!((propagate_covariance(&m, k) - &naive).amax() < 1e-10);
        }
    }
}

#[test]
fn double_integrator_position_variance() {
    let m = model(vec![], 6, (0.0, 0.0));
    for (idx, s) in covariances(&m).iter().enumerate() {
        // Position variance of x_k is (k − 1)·0.01; velocities stay exact.
        let expect = idx as f64 * 0.01;
        assert!((s[(0, 0)] - expect).abs() < 1e-15 && (s[(1, 1)] - expect).abs() < 1e-15);
        assert_eq!(s[(2, 2)], 0.0);
    }
}

#[test]
fn zero_multiplier_ignores_obstacles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let obstacles = vec![random_box(&mut rng), random_box(&mut rng)];
        let with = SmpcOracle::new(model(obstacles, 4, (3.0, 0.0)), PwlCdf::default()).unwrap();
        let free = SmpcOracle::new(model(vec![], 4, (3.0, 0.0)), PwlCdf::default()).unwrap();
        let a = with.plan(0.0).unwrap();
        let b = free.plan(0.0).unwrap();
        assert!((a.cost - b.cost).abs() < 1e-7, "{} vs {}", a.cost, b.cost);
    }
}

#[test]
fn milp_matches_facet_enumeration() {
    // One four-facet obstacle over three steps: 12 binaries.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pwl = PwlCdf::default();
    for case in 0..12 {
        let m = model(vec![random_box(&mut rng)], 3, (1.5, 0.0));
        let oracle = SmpcOracle::with_config(
            m.clone(),
            pwl.clone(),
            SmpcConfig { presolve: case % 2 == 0, ..SmpcConfig::default() },
        )
        .unwrap();
        for lambda in [0.3, 3.0, 30.0] {
            let reference = facet_enumeration(&m, &pwl, lambda).expect("feasible");
            let plan = oracle.plan(lambda).unwrap();
            let got = plan.cost + lambda * plan.total_risk;
            assert!((got - reference).abs() < 1e-6, "case {case}, λ = {lambda}: {got} vs {reference}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lambda_sweep_is_monotone(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let oracle = SmpcOracle::new(model(vec![random_box(&mut rng)], 3, (1.5, 0.0)), PwlCdf::default()).unwrap();
        let mut prev: Option<(f64, f64)> = None;
        for lambda in [0.0, 0.1, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0] {
            let c = oracle.query(&DualVector::scalar(lambda)).unwrap().cost;
            if let Some((c0, c1)) = prev {
                prop_assert!(c.c0 >= c0 - 1e-6, "c0 dropped at λ = {}", lambda);
                prop_assert!(c.c1() <= c1 + 1e-6, "c1 rose at λ = {}", lambda);
            }
            prev = Some((c.c0, c.c1()));
        }
    }
}
