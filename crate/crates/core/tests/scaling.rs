use cfslab_core::scaling::*;
use proptest::prelude::*;

fn grid() -> Vec<Bindings> {
    let mut out = Vec::new();
    for p in 5..=9 {
        for q in 0..=4 {
            for qhat in 0..=3 {
                out.push(Bindings::full(p, q, qhat).unwrap());
            }
        }
    }
    out
}

fn mono(parts: &[(Sym, i64)]) -> Monomial {
    parts.iter().fold(Monomial::one(), |m, (s, k)| m.with(*s, *k))
}

fn set(terms: &[Monomial]) -> MonomialSum {
    MonomialSum::new(terms.to_vec())
}

use Sym::*;

#[test]
fn brute_force_matches_closed_forms() {
    let regime = Regime::standard();
    for b in grid() {
        for rel in Relation::ALL {
            let d = brute_force(rel, &b, &regime).unwrap();
            let closed = closed_form(rel).eval(&b).unwrap().canonical(&regime).unwrap();
            assert!(d.result.same_terms(&closed), "{} at {b}\n{}", rel.name(), d.transcript);
        }
    }
}

#[test]
fn closed_forms_are_minimal_at_the_dirac_sea_exponent() {
    // With p = 5 no closed-form term is redundant.
    let regime = Regime::standard();
    for b in grid().into_iter().filter(|b| b.value(Param::P).unwrap() == 5) {
        for rel in Relation::ALL {
            let closed = closed_form(rel).eval(&b).unwrap();
            assert!(closed.canonical(&regime).unwrap().same_terms(&closed), "{} at {b}", rel.name());
        }
    }
}

#[test]
fn regularization_expansion_parameters() {
    let regime = Regime::standard();
    for k in 0..8 {
        assert_eq!(brute_shat(k, &regime).unwrap(), shat_of(k).unwrap());
        assert_eq!(brute_s(k, &regime).unwrap(), s_of(k).unwrap());
    }
    assert_eq!([0, 1, 2].map(|k| shat_of(k).unwrap()), [2, 0, 0]);
    assert_eq!([0, 1, 2, 3].map(|k| s_of(k).unwrap()), [4, 2, 0, 0]);
}

#[test]
fn kappa_bound_example() {
    let k = kappa_bound(5, 1).unwrap();
    assert!(k.same_terms(&set(&[mono(&[(Eps, 5), (Mass, 5)]), mono(&[(Eps, 8), (Delta, -8)])])));
    assert_eq!(k.length_dimension().unwrap().as_constant(), Some(0));
}

#[test]
fn kappa_bound_rejects_small_p() {
    assert!(kappa_bound(4, 0).is_err());
    assert!(s_multiplier_scaling(3, 1).is_err());
}

#[test]
fn origin_term_decreases_with_p() {
    let regime = Regime::standard();
    for p in 5..12 {
        let a = kappa_bound(p, 0).unwrap().terms[0];
        let b = kappa_bound(p + 1, 0).unwrap().terms[0];
        assert_eq!(regime.compare(&b, &a).unwrap(), Comparison::Below);
    }
}

#[test]
fn s_multiplier_example() {
    let s = s_multiplier_scaling(5, 0).unwrap();
    let sl = mono(&[(Sigma, 1), (Lambda, 4)]);
    let expected = set(&[sl * mono(&[(Mass, 5), (Eps, -3)]), sl * mono(&[(Delta, -6), (Eps, -2)])]);
    assert!(s.same_terms(&expected), "{s}");
}

#[test]
fn s_multiplier_carries_rescaling_prefactor() {
    for t in closed_form(Relation::SMultiplier).terms {
        assert_eq!(t.exponent(Sigma).as_constant(), Some(1));
        assert_eq!(t.exponent(Lambda).as_constant(), Some(4));
    }
}

#[test]
fn matter_total_equals_matter_ell() {
    for b in grid() {
        let total = closed_form(Relation::MatterEllTotal).eval(&b).unwrap();
        let ell = closed_form(Relation::MatterEll).eval(&b).unwrap();
        assert!(total.same_terms(&ell));
    }
    let l = matter_ell_scaling(0).unwrap();
    assert!(l.same_terms(&set(&[mono(&[(Sigma, 1), (Lambda, 4), (Energy, 1), (Eps, -4)])])));
}

#[test]
fn killing_rhs_is_universal() {
    let expected = set(&[mono(&[(Mass, 4), (Eps, -4), (Delta, -4)])]);
    let regime = Regime::standard();
    for b in grid() {
        let (p, q, qh) = (b.value(Param::P).unwrap(), b.value(Param::Q).unwrap(), b.value(Param::QHat).unwrap());
        assert!(killing_rhs_scaling(p, q, qh).unwrap().same_terms(&expected));
        assert!(brute_force(Relation::KillingRhs, &b, &regime).unwrap().result.same_terms(&expected));
    }
}

#[test]
fn matter_suppression_verdict() {
    let mdelta4 = mono(&[(Mass, 4), (Delta, 4)]);
    for b in grid() {
        let (p, q, qh) = (b.value(Param::P).unwrap(), b.value(Param::Q).unwrap(), b.value(Param::QHat).unwrap());
        let (s, shat) = (b.value(Param::S).unwrap(), b.value(Param::SHat).unwrap());
        let c = matter_vs_vacuum(p, q, qh).unwrap();
        assert!(c.kappa_t_negligible, "{b}");
        assert!(c.origin_below_matter_weight, "{b}");
        if s <= shat {
            let Verdict::Suppressed { factor, at_least_mdelta4 } = c.verdict else { panic!("{b}: {:?}", c.verdict) };
            assert!(at_least_mdelta4);
            if s == shat {
                assert_eq!(factor, mdelta4);
            }
        } else {
            // The light-cone term is then below the matter term by (δ/ε)^(s−ŝ).
            assert_eq!(c.verdict, Verdict::Incomparable, "{b}");
        }
    }
}

#[test]
fn weight_correction_balances_matter() {
    let regime = Regime::standard();
    for b in grid() {
        let (p, q, qh) = (b.value(Param::P).unwrap(), b.value(Param::Q).unwrap(), b.value(Param::QHat).unwrap());
        let h = weight_correction(p, q, qh).unwrap();
        // h · 𝔰 = matter ℓ, cross-multiplied.
        let s = closed_form(Relation::SMultiplier).eval(&b).unwrap();
        let m = closed_form(Relation::MatterEllTotal).eval(&b).unwrap();
        let lhs: Vec<Monomial> = h.numerator.terms.iter().flat_map(|n| s.terms.iter().map(move |t| *n * *t)).collect();
        let rhs: Vec<Monomial> =
            m.terms.iter().flat_map(|n| h.denominator.terms.iter().map(move |t| *n * *t)).collect();
        assert!(set(&lhs).same_terms(&set(&rhs)));
        assert!(h
            .denominator
            .canonical(&regime)
            .unwrap()
            .same_terms(&kappa_bound(p, qh).unwrap().canonical(&regime).unwrap()));
        // h carries ε⁴ T, so it is dimensionless.
        assert_eq!(h.numerator.length_dimension().unwrap().as_constant(), Some(0));
    }
}

#[test]
fn unit_audit_is_consistent() {
    let a = unit_audit();
    assert!(a.consistent, "{:?}", a.entries);
}

#[test]
fn transcript_lists_every_step() {
    let b = Bindings::full(5, 0, 0).unwrap();
    let d = brute_force(Relation::SMultiplier, &b, &Regime::standard()).unwrap();
    for needle in ["relation: s_multiplier", "regime:", "dominant:", "result:"] {
        assert!(d.transcript.contains(needle), "{needle}\n{}", d.transcript);
    }
}

fn concrete_monomial() -> impl Strategy<Value = Monomial> {
    proptest::collection::vec(-6i64..=6, 4)
        .prop_map(|e| Monomial::one().with(Eps, e[0]).with(Delta, e[1]).with(Mass, e[2]).with(Macro, e[3]))
}

proptest! {
    #[test]
    fn dominant_partitions_input(terms in proptest::collection::vec(concrete_monomial(), 1..8)) {
        let r = Regime::standard();
        let d = dominant(&terms, &r).unwrap();
        prop_assert_eq!(d.kept.len() + d.dropped.len(), terms.len());
        prop_assert!(!d.kept.is_empty());
        for a in &d.kept {
            for b in &d.kept {
                prop_assert!(r.compare(a, b).unwrap() != Comparison::Below);
            }
        }
        let again = dominant(&d.kept, &r).unwrap();
        prop_assert!(again.sum().same_terms(&d.sum()));
    }

    #[test]
    fn dominance_commutes_with_common_factor(terms in proptest::collection::vec(concrete_monomial(), 1..6), f in concrete_monomial()) {
        let r = Regime::standard();
        let scaled: Vec<Monomial> = terms.iter().map(|t| *t * f).collect();
        let a = dominant(&terms, &r).unwrap().sum().times(&f);
        let b = dominant(&scaled, &r).unwrap().sum();
        prop_assert!(a.same_terms(&b));
    }

    #[test]
    fn order_is_transitive_and_antisymmetric(a in concrete_monomial(), b in concrete_monomial(), c in concrete_monomial()) {
        let r = Regime::standard();
        let le = |x: &Monomial, y: &Monomial| r.bound(x, y).unwrap().is_some();
        if le(&a, &b) && le(&b, &c) {
            prop_assert!(le(&a, &c));
        }
        if le(&a, &b) && le(&b, &a) {
            prop_assert_eq!(a, b);
        }
    }
}
