use cfslab_core::jets::*;
use cfslab_core::linalg::{exp_i_hermitian, random_hermitian, CMatrix};
use cfslab_core::measure::{DiscreteMeasure, MultiplierSet};
use cfslab_core::minimizer::{minimize_action, random_measure, MinimizeConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn critical_f2(seed: u64) -> (DiscreteMeasure, MultiplierSet) {
    let init = random_measure(2, 1, 4, 0.0, 1.0, seed).unwrap();
    let (rho, mult, _) = minimize_action(&init, &MinimizeConfig { seed, ..Default::default() }).unwrap();
    (rho, mult)
}

fn weight_critical_f3() -> (DiscreteMeasure, MultiplierSet) {
    let init = random_measure(3, 1, 8, 0.5, 1.0, 0).unwrap();
    let cfg = MinimizeConfig { trace_target: 0.5, kappa: 0.2, optimize_positions: false, ..Default::default() };
    let (rho, mult, _) = minimize_action(&init, &cfg).unwrap();
    (rho, mult)
}

#[test]
fn minimizer_output_passes_the_weak_el_test() {
    let fd = FdConfig::default();
    for seed in [7u64, 8, 9] {
        let (rho, mult) = critical_f2(seed);
        let jets: Vec<Jet> = (0..4).map(|k| random_jet(&rho, 100 + k)).collect();
        let r = weak_el_test(&rho, &mult, &jets, &fd).unwrap();
        assert!(r <= 1e-5, "seed {seed}: {r:e}");
    }
}

#[test]
fn weak_el_residual_grows_linearly_with_a_weight_perturbation() {
    let (rho, mult) = weight_critical_f3();
    let fd = FdConfig::default();
    let ones = Jet::scalar_only(vec![1.0; rho.len()], 3);
    let base = weak_el_test(&rho, &mult, std::slice::from_ref(&ones), &fd).unwrap();
    let residual = |delta: f64| {
        let mut w = rho.weights().to_vec();
        w[0] *= 1.0 + delta;
        let bumped = DiscreteMeasure::new(rho.points().to_vec(), w).unwrap();
        weak_el_test(&bumped, &mult, std::slice::from_ref(&ones), &fd).unwrap()
    };
    let (r1, r2, r4) = (residual(1e-4), residual(2e-4), residual(4e-4));
    assert!(base < 1e-3 * r1, "{base:e} {r1:e}");
    assert!((r2 / r1 - 2.0).abs() < 0.05 && (r4 / r2 - 2.0).abs() < 0.05, "{r1:e} {r2:e} {r4:e}");
}

#[test]
fn exponential_weight_family_gives_its_rate() {
    let rho = random_measure(3, 1, 3, 0.5, 1.0, 4).unwrap();
    let rates = [0.3, -1.2, 2.0];
    let points: Vec<CMatrix> = rho.points().iter().map(|x| x.matrix().clone()).collect();
    let fam = JetFamily {
        weight: Box::new(move |i, t| (rates[i] * t).exp()),
        map: Box::new(move |i, _| Ok(points[i].clone())),
    };
    let jet = jet_from_family(&fam, &rho).unwrap();
    for (a, b) in jet.scalar.iter().zip(rates) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!(jet.vector.iter().all(|v| v.norm() < 1e-8));
}

#[test]
fn unitary_family_gives_the_commutator() {
    let rho = random_measure(4, 2, 3, 0.2, 1.0, 6).unwrap();
    let h = random_hermitian(&mut ChaCha8Rng::seed_from_u64(1), 4);
    let points: Vec<CMatrix> = rho.points().iter().map(|x| x.matrix().clone()).collect();
    let hh = h.clone();
    let fam = JetFamily {
        weight: Box::new(|_, _| 1.0),
        map: Box::new(move |i, t| {
            let u = exp_i_hermitian(&hh, t);
            Ok(&u * &points[i] * u.adjoint())
        }),
    };
    let jet = jet_from_family(&fam, &rho).unwrap();
    let oracle = unitary_jet(&rho, &h);
    for (a, b) in jet.vector.iter().zip(&oracle.vector) {
        assert!((a - b).norm() < 1e-7 * b.norm().max(1.0), "{}", (a - b).norm());
    }
    assert!(jet.scalar.iter().all(|s| s.abs() < 1e-10));
}

#[test]
fn linearized_residual_separates_solutions_from_generic_jets() {
    // The f = 3 background is critical for weight variations only, so the
    // test jets are scalar.
    let (rho, mult) = weight_critical_f3();
    let fd = FdConfig::default();
    let tests: Vec<Jet> =
        (0..3).map(|k| Jet::scalar_only((0..rho.len()).map(|i| ((i + k) as f64).cos()).collect(), 3)).collect();
    assert_eq!(linearized_residual(&Jet::zero(&rho), &rho, &mult, &tests, &fd).unwrap(), 0.0);
    let h = random_hermitian(&mut ChaCha8Rng::seed_from_u64(2), 3);
    let symmetry = linearized_residual(&unitary_jet(&rho, &h), &rho, &mult, &tests, &fd).unwrap();
    let generic = linearized_residual(&random_jet(&rho, 77), &rho, &mult, &tests, &fd).unwrap();
    assert!(generic > 1e-3, "{generic:e}");
    assert!(symmetry < 1e-6 * generic, "{symmetry:e} {generic:e}");
}

#[test]
fn symmetry_jets_solve_the_linearized_equations_on_critical_measures() {
    let (rho, mult) = critical_f2(7);
    let fd = FdConfig::default();
    let tests: Vec<Jet> = (0..3).map(|k| random_jet(&rho, 60 + k)).collect();
    let h = random_hermitian(&mut ChaCha8Rng::seed_from_u64(3), 2);
    let r = linearized_residual(&unitary_jet(&rho, &h), &rho, &mult, &tests, &fd).unwrap();
    assert!(r <= 1e-6, "{r:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pairing_does_not_depend_on_the_nesting_order(seed in 0u64..500) {
        let rho = random_measure(3, 1, 4, 0.5, 1.0, seed).unwrap();
        let mult = MultiplierSet::new(0.1, 0.3, 0.5).unwrap();
        let (u, v) = (random_jet(&rho, seed + 1), random_jet(&rho, seed + 2));
        let fd = FdConfig::default();
        for i in 0..rho.len() {
            let a = delta_pairing(&u, &v, &rho, &mult, i, &fd, NestOrder::OuterFirst).unwrap();
            let b = delta_pairing(&u, &v, &rho, &mult, i, &fd, NestOrder::OuterSecond).unwrap();
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{} {}", a, b);
        }
    }

    #[test]
    fn nabla_of_a_constant_is_the_scalar_times_the_constant(a in -3.0f64..3.0, k in -5.0f64..5.0, seed in 0u64..100) {
        let rho = random_measure(3, 1, 1, 0.5, 1.0, seed).unwrap();
        let u = random_jet(&rho, seed);
        let x = &rho.points()[0];
        let got = nabla(a, &u.vector[0], |_| Ok(k), x, &FdConfig::default()).unwrap();
        prop_assert!((got - a * k).abs() <= 1e-10 * (a * k).abs().max(1.0));
    }
}
