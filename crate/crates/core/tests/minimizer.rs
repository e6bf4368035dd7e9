use cfslab_core::linalg::hermitian_eigen;
use cfslab_core::measure::{causal_action, el_residual, lagrangian_table, DiscreteMeasure, MultiplierSet};
use cfslab_core::minimizer::*;
use cfslab_core::operator::{KernelParams, Operator};
use proptest::prelude::*;

fn sigma_x() -> Operator {
    use cfslab_core::linalg::{c64, CMatrix};
    let (o, z) = (c64(1.0, 0.0), c64(0.0, 0.0));
    Operator::new(CMatrix::from_row_slice(2, 2, &[z, o, o, z]), 1).unwrap()
}

fn weight_critical(seed: u64) -> (DiscreteMeasure, MultiplierSet, MinimizeConfig) {
    let init = random_measure(3, 1, 8, 0.5, 1.0, seed).unwrap();
    let cfg = MinimizeConfig { trace_target: 0.5, kappa: 0.2, optimize_positions: false, seed, ..Default::default() };
    let (rho, mult, _) = minimize_action(&init, &cfg).unwrap();
    (rho, mult, cfg)
}

#[test]
fn seeded_two_dimensional_run_is_critical() {
    let init = random_measure(2, 1, 4, 0.0, 1.0, 7).unwrap();
    let cfg = MinimizeConfig { seed: 7, ..Default::default() };
    let (rho, mult, report) = minimize_action(&init, &cfg).unwrap();
    let el = el_residual(&rho, &mult, 32, 0.1, 7).unwrap();
    assert!(el.support_residual <= 1e-6, "{el:?}");
    let crit = criticality_report(&rho, &mult, &cfg).unwrap();
    assert!(crit.support_residual <= 1e-6 && crit.spread <= 1e-6, "{crit:?}");
    assert!(crit.volume_violation <= 1e-8 && crit.trace_violation <= 1e-8);
    assert!(!report.history.is_empty());
    assert!(report.history_csv().lines().count() == report.history.len() + 1);
}

#[test]
fn two_point_multiplier() {
    let rho =
        DiscreteMeasure::new(vec![Operator::diagonal(&[1.0, -1.0], 1).unwrap(), sigma_x()], vec![1.0, 1.0]).unwrap();
    let (s, spread) = estimate_s(&rho, 1.0).unwrap();
    assert!((s - 8.0).abs() < 1e-12);
    assert!(spread.abs() < 1e-12);
}

#[test]
fn random_measures_are_not_critical() {
    let rho = random_measure(3, 1, 6, 0.5, 1.0, 1).unwrap();
    assert!(estimate_s(&rho, 0.2).unwrap().1 > 0.0);
}

#[test]
fn perturbing_one_weight_breaks_criticality() {
    let (rho, mult, cfg) = weight_critical(1);
    assert!(criticality_report(&rho, &mult, &cfg).unwrap().spread <= 1e-6);
    let mut w = rho.weights().to_vec();
    w[0] *= 1.01;
    let bumped = DiscreteMeasure::new(rho.points().to_vec(), w).unwrap();
    let (_, spread) = estimate_s(&bumped, mult.kappa).unwrap();
    assert!(spread > 1e-4, "{spread}");
}

#[test]
fn rescaled_problem_has_rescaled_solution() {
    let lam: f64 = 2.0;
    let init = random_measure(3, 1, 6, 0.5, 1.0, 11).unwrap();
    let cfg =
        MinimizeConfig { trace_target: 0.5, kappa: 0.2, optimize_positions: false, seed: 11, ..Default::default() };
    let (rho, _, _) = minimize_action(&init, &cfg).unwrap();
    let cfg2 = MinimizeConfig { trace_target: lam * 0.5, ..cfg.clone() };
    let (rho2, _, _) = minimize_action(&init.rescaled(lam, 1.0).unwrap(), &cfg2).unwrap();
    assert_eq!(rho.len(), rho2.len());
    let params = KernelParams::with_kappa(cfg.kappa);
    let ratio = causal_action(&rho2, &params).unwrap() / causal_action(&rho, &params).unwrap();
    assert!((ratio - lam.powi(4)).abs() < 1e-8 * lam.powi(4), "{ratio}");
    for (a, b) in rho.weights().iter().zip(rho2.weights()) {
        assert!((a - b).abs() < 1e-8);
    }
    // Unitary invariants: point spectra and the pair table.
    for (x, y) in rho.points().iter().zip(rho2.points()) {
        let (ex, ey) = (hermitian_eigen(x.matrix()).values, hermitian_eigen(y.matrix()).values);
        for (a, b) in ex.iter().zip(&ey) {
            assert!((lam * a - b).abs() < 1e-8 * lam);
        }
    }
    let t1 = lagrangian_table(&rho.prepared(), &params).unwrap();
    let t2 = lagrangian_table(&rho2.prepared(), &params).unwrap();
    let top = t1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in t1.iter().zip(&t2) {
        assert!((lam.powi(4) * a - b).abs() < 1e-8 * lam.powi(4) * top);
    }
}

#[test]
fn invalid_configuration_is_rejected() {
    let init = random_measure(2, 1, 2, 0.0, 1.0, 0).unwrap();
    let bad = [
        MinimizeConfig { tol_grad: 0.0, ..Default::default() },
        MinimizeConfig { volume_target: -1.0, ..Default::default() },
        MinimizeConfig { eta_schedule: vec![1e-4, 1e-2], ..Default::default() },
    ];
    for cfg in bad {
        assert!(minimize_action(&init, &cfg).is_err(), "{cfg:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_are_reproducible_and_feasible(seed in 0u64..1000, count in 2usize..6) {
        let init = random_measure(2, 1, count, 0.0, 1.0, seed).unwrap();
        let cfg = MinimizeConfig { seed, ..Default::default() };
        let (a, ma, ra) = minimize_action(&init, &cfg).unwrap();
        let (b, mb, rb) = minimize_action(&init, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ma, mb);
        prop_assert_eq!(ra.iterations, rb.iterations);
        let crit = criticality_report(&a, &ma, &cfg).unwrap();
        prop_assert!(crit.volume_violation <= 1e-8 && crit.trace_violation <= 1e-8);
        prop_assert!(crit.support_residual <= 1e-6);
    }

    #[test]
    fn simplex_projection_is_feasible_and_idempotent(v in proptest::collection::vec(-3.0f64..3.0, 1..10), vol in 0.1f64..5.0) {
        let p = project_to_simplex(&v, vol);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - vol).abs() <= 1e-12 * vol);
        let q = project_to_simplex(&p, vol);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12 * vol);
        }
    }
}
