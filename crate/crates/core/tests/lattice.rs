use cfslab_core::lattice::*;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = [f64; 4]> {
    proptest::array::uniform4(0.2f64..0.8)
}

fn amplitude() -> impl Strategy<Value = [f64; 4]> {
    proptest::array::uniform4(-0.4f64..0.4)
}

#[test]
fn shear_fields_are_exactly_divergence_free_on_the_grid() {
    let chart = LatticeChart::unit_box(6).unwrap();
    for axis in 0..4 {
        let v = Field::ShearBump { axis, amplitude: 0.7, lo: [0.1; 4], hi: [0.9; 4] };
        let grid = GridVectorField::sample(&v, &chart);
        assert!(divergence(&grid, &chart, &Density::Constant(1.0)).iter().all(|d| *d == 0.0));
        let bg = LatticeBackground::new(
            chart.clone(),
            Embedding::random_commuting(3, 1, 2, 0.1).unwrap(),
            Density::Constant(1.0),
        )
        .unwrap();
        assert!(inner_solution(&v, &bg).unwrap().scalar.iter().all(|b| *b == 0.0));
    }
}

#[test]
fn zero_flow_leaves_the_background_unchanged() {
    let chart = LatticeChart::unit_box(3).unwrap();
    let bg =
        LatticeBackground::new(chart, Embedding::random_unitary_orbit(3, 1, 4, 0.5).unwrap(), Density::Constant(1.0))
            .unwrap();
    let same = bg.pulled_back(&Field::Zero, 0.3, &FlowConfig::default()).unwrap();
    assert_eq!(same.measure().unwrap(), bg.measure().unwrap());
}

#[test]
fn embedded_points_are_regular_with_constant_trace() {
    let chart = LatticeChart::unit_box(3).unwrap();
    for emb in
        [Embedding::random_commuting(4, 2, 1, 0.1).unwrap(), Embedding::random_unitary_orbit(4, 2, 1, 0.5).unwrap()]
    {
        let rho = LatticeBackground::new(chart.clone(), emb, Density::Constant(1.0)).unwrap().measure().unwrap();
        let t0 = rho.points()[0].trace();
        assert!(rho.points().iter().all(|x| (x.trace() - t0).abs() < 1e-12));
        assert_eq!(rho.spin_dim(), Some(2));
    }
}

#[test]
fn measure_weights_are_density_times_cell_volume() {
    let chart = LatticeChart::unit_box(4).unwrap();
    let density = Density::Exponential { axis: 0, rate: 0.5 };
    let bg = LatticeBackground::new(chart.clone(), Embedding::random_commuting(3, 1, 1, 0.1).unwrap(), density.clone())
        .unwrap();
    let rho = bg.measure().unwrap();
    for (i, w) in rho.weights().iter().enumerate() {
        assert!((w - density.eval(&chart.coord(i)) * chart.cell_volume()).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_round_trip_is_the_identity(p in coord(), a in amplitude(), tau in -0.2f64..0.2) {
        let v = Field::Bump { amplitude: a, lo: [0.0; 4], hi: [1.0; 4] };
        let density = Density::Cosine { amplitude: 0.3, wave: [1.0, 2.0, 0.0, -1.0] };
        let cfg = FlowConfig::default();
        let (q, lj) = flow_point(&v, &density, &p, tau, &cfg);
        let (back, lj2) = flow_point(&v, &density, &q, -tau, &cfg);
        for k in 0..4 {
            prop_assert!((back[k] - p[k]).abs() <= 1e-10);
        }
        prop_assert!((lj + lj2).abs() <= 1e-8);
    }

    #[test]
    fn constant_fields_have_no_net_flux(lo in proptest::array::uniform4(0.0f64..0.45), w in proptest::array::uniform4(0.2f64..0.5), v in amplitude()) {
        let chart = LatticeChart::unit_box(6).unwrap();
        let hi: [f64; 4] = std::array::from_fn(|k| lo[k] + w[k]);
        let region = Region::boxed(&chart, lo, hi);
        prop_assume!(region.count() > 0);
        let flux = boundary_flux_measure(&Field::Constant(v), &region, &chart, &Density::Constant(1.0)).unwrap();
        let total: f64 = flux.iter().map(|(_, x)| x).sum();
        prop_assert!(total.abs() <= 1e-12);
    }

    #[test]
    fn pushforward_is_linear_in_the_direction(p in coord(), a in amplitude(), b in amplitude(), seed in 0u64..50) {
        let emb = Embedding::random_unitary_orbit(3, 1, seed, 0.5).unwrap();
        let step = 1e-4;
        let mix: [f64; 4] = std::array::from_fn(|k| 0.3 * a[k] - 1.1 * b[k]);
        let lhs = emb.pushforward(&p, &mix, step).unwrap();
        let rhs = emb.pushforward(&p, &a, step).unwrap() * cfslab_core::linalg::c64(0.3, 0.0)
            - emb.pushforward(&p, &b, step).unwrap() * cfslab_core::linalg::c64(1.1, 0.0);
        prop_assert!((lhs - &rhs).norm() <= 1e-8 * rhs.norm().max(1.0));
    }

    #[test]
    fn region_algebra(bits in proptest::collection::vec(any::<bool>(), 81), other in proptest::collection::vec(any::<bool>(), 81)) {
        let a = Region::from_indicator(bits);
        let b = Region::from_indicator(other);
        prop_assert_eq!(a.complement().complement(), a.clone());
        prop_assert_eq!(a.intersection(&a.complement()).count(), 0);
        prop_assert_eq!(a.count() + a.complement().count(), 81);
        prop_assert!(a.intersection(&b).count() <= a.count().min(b.count()));
    }

    #[test]
    fn facets_separate_inside_from_outside(bits in proptest::collection::vec(any::<bool>(), 81)) {
        let chart = LatticeChart::unit_box(3).unwrap();
        let region = Region::from_indicator(bits);
        for f in region.facets(&chart) {
            prop_assert!(region.contains(f.node));
            match chart.neighbor(f.node, f.axis, f.outward > 0.0) {
                Some(j) => prop_assert!(!region.contains(j) && !f.chart_face),
                None => prop_assert!(f.chart_face),
            }
        }
    }
}
