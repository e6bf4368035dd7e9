use cfslab_core::linalg::{eigenvalues, hermiticity_defect, random_hermitian, random_unitary, CMatrix};
use cfslab_core::operator::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64, f: usize, n: usize, c: f64) -> (Operator, Operator, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| loop {
        if let Ok(x) = project_to_freg(&random_hermitian(rng, f), n, c) {
            break x;
        }
    };
    let x = draw(&mut rng);
    let y = draw(&mut rng);
    (x, y, rng)
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=6).prop_flat_map(|f| (Just(f), 1usize..=(f / 2).min(2)))
}

#[test]
fn spectrum_has_at_most_2n_nonzero_values() {
    for seed in 0..50 {
        let (x, y, _) = pair(seed, 6, 2, 0.3);
        let s = product_spectrum(&x, &y).unwrap();
        assert_eq!(s.eigenvalues.len(), 4);
        assert!(s.rank <= 4);
        // Descending moduli.
        for w in s.eigenvalues.windows(2) {
            assert!(w[0].norm() >= w[1].norm() - 1e-12 * s.eigenvalues[0].norm());
        }
    }
}

#[test]
fn kappa_adds_the_squared_spectral_weight() {
    let (x, y, _) = pair(3, 4, 2, 0.0);
    let w = spectral_weight(&x, &y, &KernelParams::with_kappa(0.0)).unwrap();
    let l0 = lagrangian(&x, &y, &KernelParams::with_kappa(0.0)).unwrap();
    let l1 = lagrangian(&x, &y, &KernelParams::with_kappa(0.7)).unwrap();
    assert!((l1 - l0 - 0.7 * w * w).abs() <= 1e-12 * w * w);
}

#[test]
fn smoothing_converges_to_the_exact_lagrangian() {
    let (x, y, _) = pair(5, 4, 1, 0.2);
    let exact = lagrangian(&x, &y, &KernelParams::with_kappa(0.0)).unwrap();
    let gaps: Vec<f64> = [1e-2, 1e-4, 1e-6]
        .iter()
        .map(|&eta| (lagrangian(&x, &y, &KernelParams::new(0.0, eta).unwrap()).unwrap() - exact).abs())
        .collect();
    assert!(gaps[2] <= gaps[1] && gaps[1] <= gaps[0], "{gaps:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagrangian_matches_the_full_product_oracle(seed in any::<u64>(), (f, n) in dims(), c in -1.0f64..1.0) {
        let (x, y, _) = pair(seed, f, n, c);
        let params = KernelParams::with_kappa(0.0);
        let l = lagrangian(&x, &y, &params).unwrap();
        let w = spectral_weight(&x, &y, &params).unwrap();
        let mods: Vec<f64> = eigenvalues(&(x.matrix() * y.matrix())).unwrap().iter().map(|z| z.norm()).collect();
        let s1: f64 = mods.iter().sum();
        let s2: f64 = mods.iter().map(|m| m * m).sum();
        let scale = (w * w).max(1e-300);
        prop_assert!((l - (s2 - s1 * s1 / (2.0 * n as f64))).abs() <= 1e-10 * scale);
        prop_assert!((w - s1).abs() <= 1e-10 * s1.max(1e-300));
    }

    #[test]
    fn lagrangian_is_symmetric_nonnegative_and_invariant(seed in any::<u64>(), (f, n) in dims(), c in -1.0f64..1.0) {
        let (x, y, mut rng) = pair(seed, f, n, c);
        let params = KernelParams::with_kappa(0.3);
        let l = lagrangian(&x, &y, &params).unwrap();
        let w = spectral_weight(&x, &y, &params).unwrap();
        let scale = (w * w).max(1e-300);
        prop_assert!(l >= -1e-12 * scale);
        prop_assert!((l - lagrangian(&y, &x, &params).unwrap()).abs() <= 1e-10 * scale);
        let u = random_unitary(&mut rng, f);
        let lu = lagrangian(&x.conjugated(&u).unwrap(), &y.conjugated(&u).unwrap(), &params).unwrap();
        prop_assert!((l - lu).abs() <= 1e-10 * scale);
    }

    #[test]
    fn rescaling_is_covariant(seed in any::<u64>(), (f, n) in dims(), lam in 0.1f64..10.0) {
        let (x, y, _) = pair(seed, f, n, 0.5);
        let params = KernelParams::with_kappa(0.0);
        let (xs, ys) = (x.scaled(lam).unwrap(), y.scaled(lam).unwrap());
        let w = spectral_weight(&x, &y, &params).unwrap();
        let ws = spectral_weight(&xs, &ys, &params).unwrap();
        prop_assert!((ws - lam * lam * w).abs() <= 1e-12 * lam * lam * w);
        let l = lagrangian(&x, &y, &params).unwrap();
        let ls = lagrangian(&xs, &ys, &params).unwrap();
        prop_assert!((ls - lam.powi(4) * l).abs() <= 1e-12 * lam.powi(4) * w * w);
        prop_assert!((xs.trace() - lam * x.trace()).abs() <= 1e-12 * lam * x.matrix().norm());
    }

    #[test]
    fn projection_lands_in_the_regular_set(seed in any::<u64>(), (f, n) in dims(), c in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_hermitian(&mut rng, f);
        if let Ok(x) = project_to_freg(&a, n, c) {
            prop_assert!(hermiticity_defect(x.matrix()) == 0.0 || hermiticity_defect(x.matrix()) < 1e-14);
            prop_assert!((x.trace() - c).abs() <= 1e-12 * (1.0 + a.norm()));
            let vals = x.prepare().values().to_vec();
            prop_assert!(vals.iter().filter(|v| **v > 0.0).count() <= n);
            prop_assert!(vals.iter().filter(|v| **v < 0.0).count() <= n);
            // Idempotent on its image.
            let again = project_to_freg(x.matrix(), n, c).unwrap();
            prop_assert!((again.matrix() - x.matrix()).norm() <= 1e-12 * x.matrix().norm());
        }
    }

    #[test]
    fn tangent_projection_is_a_projection(seed in any::<u64>(), (f, n) in dims()) {
        let (x, _, mut rng) = pair(seed, f, n, 0.0);
        let p = x.prepare();
        let a = random_hermitian(&mut rng, f);
        let t = tangent_project(&p, &a);
        let tt = tangent_project(&p, &t);
        prop_assert!((&tt - &t).norm() <= 1e-12 * a.norm());
        prop_assert!(cfslab_core::linalg::trace(&t).norm() <= 1e-12 * a.norm());
    }
}

#[test]
fn zero_matrix_has_no_admissible_signature() {
    assert!(project_to_freg(&CMatrix::zeros(2, 2), 1, 0.0).is_err());
}
