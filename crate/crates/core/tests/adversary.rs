use hmix_core::adversary::{
    bounded_disturbance, dos_disturbance, perturbed_costs, Adversary, AttackConfig,
    CostPerturbConfig, DisturbanceSource,
};
use hmix_core::bench::{bundled_model_path, load_model};
use hmix_core::numkernel::{min_eigenvalue, operator_norm, Matrix};
use hmix_core::online::check_admissible;
use hmix_core::sysmodel::{Trajectory, Vector};
use hmix_core::Error;
use proptest::prelude::*;

#[test]
fn uniform_radius_monte_carlo() {
    let cfg = AttackConfig::arbitrary(2.5, 77);
    let draws = 100_000;
    let mut total = 0.0;
    let mut largest = 0.0f64;
    for t in 1..=draws {
        let n = bounded_disturbance(&cfg, t, 3).norm();
        total += n;
        largest = largest.max(n);
    }
    let mean = total / draws as f64;
    assert!(largest <= 2.5);
    assert!(
        (0.45 * 2.5..=0.55 * 2.5).contains(&mean),
        "mean norm {mean}"
    );
}

#[test]
fn perturbed_costs_property_over_many_seeds() {
    let q_base = Matrix::identity(2, 2) * 2.0;
    let r_base = Matrix::identity(1, 1) * 2.0;
    for seed in 0..10_000 {
        let cfg = CostPerturbConfig {
            delta: 0.1,
            mu: 1.0,
            sigma: 10.0,
            seed,
        };
        let (q, r) = perturbed_costs(&cfg, &q_base, &r_base, 1 + (seed as usize % 7)).unwrap();
        assert!(operator_norm(&(&q - &q_base)).unwrap() <= 0.2 + 1e-12);
        assert!(min_eigenvalue(&q).unwrap() >= 1.0);
        assert!(q.trace() <= 10.0);
        assert!((&q - q.transpose()).amax() == 0.0);
        check_admissible(&q, 1.0, 10.0, "Q").unwrap();
        check_admissible(&r, 1.0, 10.0, "R").unwrap();
    }
}

#[test]
fn trace_cap_active_at_the_boundary() {
    let q_base = Matrix::identity(2, 2) * 1.5;
    for seed in 0..500 {
        let cfg = CostPerturbConfig {
            delta: 0.2,
            mu: 1.0,
            sigma: 3.0,
            seed,
        };
        let (q, _) = perturbed_costs(&cfg, &q_base, &Matrix::identity(1, 1), 3).unwrap();
        assert!(q.trace() <= 3.0);
        assert!(min_eigenvalue(&q).unwrap() >= 1.0);
    }
}

#[test]
fn inadmissible_base_rejected() {
    let cfg = CostPerturbConfig {
        delta: 0.1,
        mu: 1.0,
        sigma: 10.0,
        seed: 0,
    };
    let q = Matrix::identity(2, 2) * 0.5;
    assert!(matches!(
        perturbed_costs(&cfg, &q, &Matrix::identity(1, 1), 1),
        Err(Error::InadmissibleBase(_))
    ));
}

#[test]
fn dos_window_cancels_control_in_simulation() {
    let model = load_model(&bundled_model_path("eight_state")).unwrap();
    let sys = &model.sys;
    let cfg = AttackConfig::dos(1.0, (20, 60), 3);
    let adversary = Adversary::new(cfg, sys).unwrap();
    let k = model.stabilizing_gain.clone();
    let mut traj = Trajectory::new(Vector::from_element(8, 1.0));
    for t in 1..=80 {
        let x = traj.current_state().clone();
        let u = -(k.matrix() * &x);
        let w = adversary.disturbance(t, &u).unwrap();
        traj.advance(sys, &k, |_, _| w.clone()).unwrap();
        if cfg.in_window(t) {
            let defect = (traj.current_state() - sys.a() * &x).norm();
            assert!(defect <= 1e-12, "t={t}: defect {defect:e}");
        }
    }
}

#[test]
fn dos_needs_identity_disturbance_map() {
    let model = load_model(&bundled_model_path("eight_state")).unwrap();
    let sys = model
        .sys
        .with_disturbance(Matrix::identity(8, 8) * 0.5)
        .unwrap();
    let cfg = AttackConfig::dos(1.0, (2, 5), 0);
    assert!(matches!(
        dos_disturbance(&cfg, 3, &sys, &Vector::zeros(4)),
        Err(Error::DosRequiresIdentityD)
    ));
    assert!(matches!(
        Adversary::new(cfg, &sys),
        Err(Error::DosRequiresIdentityD)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disturbance_is_deterministic_and_bounded(seed in any::<u64>(), t in 1usize..100_000, w in 0.0f64..10.0) {
        let cfg = AttackConfig::arbitrary(w, seed);
        let a = bounded_disturbance(&cfg, t, 4);
        let b = bounded_disturbance(&cfg, t, 4);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.norm() <= w);
    }

    #[test]
    fn costs_are_admissible_and_reproducible(seed in any::<u64>(), t in 1usize..10_000, delta in 0.0f64..0.5) {
        let cfg = CostPerturbConfig { delta, mu: 1.0, sigma: 2.3, seed };
        let q_base = Matrix::identity(2, 2) * 1.05;
        let r_base = Matrix::identity(1, 1) * 1.05;
        let (q, r) = perturbed_costs(&cfg, &q_base, &r_base, t).unwrap();
        check_admissible(&q, 1.0, 2.3, "Q").unwrap();
        check_admissible(&r, 1.0, 2.3, "R").unwrap();
        let again = perturbed_costs(&cfg, &q_base, &r_base, t).unwrap();
        prop_assert_eq!((q, r), again);
    }
}
