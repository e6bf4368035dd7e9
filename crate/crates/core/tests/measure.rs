use cfslab_core::linalg::c64;
use cfslab_core::linalg::CMatrix;
use cfslab_core::measure::*;
use cfslab_core::minimizer::random_measure;
use cfslab_core::operator::{KernelParams, Operator};
use proptest::prelude::*;

fn sigma_x() -> Operator {
    let o = c64(1.0, 0.0);
    let z = c64(0.0, 0.0);
    Operator::new(CMatrix::from_row_slice(2, 2, &[z, o, o, z]), 1).unwrap()
}

fn two_point() -> DiscreteMeasure {
    DiscreteMeasure::new(vec![Operator::diagonal(&[1.0, -1.0], 1).unwrap(), sigma_x()], vec![1.0, 1.0]).unwrap()
}

#[test]
fn two_point_system() {
    let rho = two_point();
    assert_eq!(causal_action(&rho, &KernelParams::with_kappa(0.0)).unwrap(), 0.0);
    assert!((causal_action(&rho, &KernelParams::with_kappa(1.0)).unwrap() - 16.0).abs() < 1e-12);
    let c = constraint_values(&rho).unwrap();
    assert_eq!((c.volume, c.trace_integral), (2.0, 0.0));
    assert!((c.boundedness - 16.0).abs() < 1e-12);
    let x1 = &rho.points()[0];
    assert_eq!(ell_kappa(x1, &rho, &MultiplierSet::new(0.0, 0.0, 0.0).unwrap()).unwrap(), 0.0);
    assert_eq!(ell_kappa(x1, &rho, &MultiplierSet::new(0.0, 1.0, 0.0).unwrap()).unwrap(), -1.0);
}

#[test]
fn support_residual_is_the_spread_when_s_is_the_minimum() {
    let rho = random_measure(3, 1, 6, 0.4, 1.0, 2).unwrap();
    let params = KernelParams::with_kappa(0.2);
    let rows = row_sums(&lagrangian_table(&rho.prepared(), &params).unwrap(), rho.weights());
    let lo = rows.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r = el_residual(&rho, &MultiplierSet::new(0.2, lo, 0.4).unwrap(), 0, 0.0, 0).unwrap();
    assert!((r.support_residual - (hi - lo)).abs() <= 1e-12 * hi.abs());
}

#[test]
fn exterior_probes_are_counted_and_reproducible() {
    let rho = random_measure(2, 1, 4, 0.0, 1.0, 5).unwrap();
    let mult = MultiplierSet::new(0.0, 0.0, 0.0).unwrap();
    let a = el_residual(&rho, &mult, 32, 0.1, 9).unwrap();
    let b = el_residual(&rho, &mult, 32, 0.1, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.probes_evaluated <= 32 && a.probes_evaluated > 0);
}

#[test]
fn pair_table_is_symmetric() {
    let rho = random_measure(4, 2, 7, -0.3, 2.0, 8).unwrap();
    let t = lagrangian_table(&rho.prepared(), &KernelParams::with_kappa(0.1)).unwrap();
    let m = rho.len();
    for i in 0..m {
        for j in 0..m {
            assert_eq!(t[i * m + j], t[j * m + i]);
        }
    }
}

#[test]
fn malformed_text_is_rejected() {
    assert!(DiscreteMeasure::from_text("f 2\n").is_err());
    assert!(DiscreteMeasure::from_text("").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn text_round_trip_is_exact(seed in any::<u64>(), f in 2usize..=5, count in 1usize..6, c in -2.0f64..2.0) {
        let n = if f >= 4 { 2 } else { 1 };
        let rho = random_measure(f, n, count, c, 1.7, seed).unwrap();
        let (back, c_back) = DiscreteMeasure::from_text(&rho.to_text(c)).unwrap();
        prop_assert_eq!(c_back, c);
        prop_assert_eq!(back.weights(), rho.weights());
        for (a, b) in back.points().iter().zip(rho.points()) {
            prop_assert_eq!(a.matrix(), b.matrix());
        }
    }

    #[test]
    fn rescaling_transforms_the_constraints(seed in any::<u64>(), lam in 0.2f64..5.0, sigma in 0.2f64..5.0) {
        let rho = random_measure(3, 1, 5, 0.5, 1.0, seed).unwrap();
        let s = rho.rescaled(lam, sigma).unwrap();
        let (a, b) = (constraint_values(&rho).unwrap(), constraint_values(&s).unwrap());
        prop_assert!((b.volume - sigma * a.volume).abs() <= 1e-12 * sigma * a.volume);
        prop_assert!((b.trace_integral - sigma * lam * a.trace_integral).abs() <= 1e-12 * sigma * lam * a.trace_integral.abs().max(1.0));
        let l4 = lam.powi(4);
        prop_assert!((b.boundedness - sigma * sigma * l4 * a.boundedness).abs() <= 1e-12 * sigma * sigma * l4 * a.boundedness);
    }
}
