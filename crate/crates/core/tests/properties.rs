//! Property-based invariants of the inequality lab.

use proptest::prelude::*;
use qlpen::lab::*;
use qlpen::reference::horizon_radius;
use qlpen::{RNParams, Variant};

fn rn_scenario(variant: Variant, mbar: f64, qbar: f64, mass: f64, charge: f64, r_b: f64) -> Scenario {
    Scenario {
        variant,
        interior: InteriorSpec::Rn { mass: Some(mass), charge: Some(charge), r_b: Some(r_b), r_b_factor: None },
        ..Scenario::equality(mbar, qbar, r_b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    /// Interior = reference truncation saturates the inequality.
    #[test]
    fn equality_family_saturates(m in 0.2f64..3.0, qr in -0.95f64..0.95, f in 1.2f64..8.0) {
        let q = qr * m;
        let rp = horizon_radius(&RNParams::new(m, q).unwrap()).unwrap();
        let rep = evaluate_inequality(&Scenario::equality(m, q, f * rp)).unwrap();
        prop_assert!(rep.gap.abs() < 1e-8, "gap {}", rep.gap);
        prop_assert_eq!(rep.status, Status::Ok);
    }

    /// Hypotheses true never comes with a failing inequality on RN data.
    #[test]
    fn never_critical(
        mbar in 0.0f64..2.0,
        qr in 0.0f64..1.0,
        zero_mass in proptest::bool::weighted(0.2),
        dm in 0.0f64..1.5,
        charge in -1.0f64..1.0,
        f in 1.1f64..6.0,
        v in 0usize..3,
    ) {
        // Sub-extremal references; zero-mass references take any charge.
        let (mbar, qbar) = if zero_mass { (0.0, qr) } else { (mbar.max(0.05), qr * mbar.max(0.05)) };
        let mass = mbar + dm + charge.abs();
        let rp = horizon_radius(&RNParams::new(mass, charge).unwrap()).unwrap();
        let variant = [Variant::A, Variant::B, Variant::C][v];
        let sc = rn_scenario(variant, mbar, qbar, mass, charge, f * rp);
        let rep = evaluate_inequality(&sc).unwrap();
        prop_assert!(rep.status != Status::Critical, "{:?}: gap {} failures {:?}", sc, rep.gap, rep.checklist.failures());
        if rep.status == Status::Ok {
            prop_assert!(rep.gap >= -(rep.gap_tol + sc.numerics.tol));
        }
    }

    /// Flipping every charge leaves the report unchanged.
    #[test]
    fn charge_flip_symmetry(mbar in 0.5f64..2.0, qr in 0.05f64..0.9, dm in 0.0f64..1.0, f in 1.2f64..5.0) {
        let mass = mbar + dm;
        let q = qr * mbar;
        let rp = horizon_radius(&RNParams::new(mass, q).unwrap()).unwrap();
        let pos = evaluate_inequality(&rn_scenario(Variant::B, mbar, q, mass, q, f * rp)).unwrap();
        let neg = evaluate_inequality(&rn_scenario(Variant::B, mbar, -q, mass, -q, f * rp)).unwrap();
        prop_assert!((pos.lhs - neg.lhs).abs() < 1e-14 && (pos.rhs - neg.rhs).abs() < 1e-14);
        prop_assert_eq!(pos.status, neg.status);
        prop_assert_eq!(neg.orientation, -1.0);
    }

    /// The right-hand side increases with area above the critical area 4πQ².
    #[test]
    fn rhs_monotone(q in 0.0f64..1.0, a in 0.1f64..100.0, da in 1e-3f64..10.0) {
        let crit = 4.0 * std::f64::consts::PI * q * q;
        prop_assume!(a > crit);
        prop_assert!(penrose_rhs(a + da, q, 1.0) > penrose_rhs(a, q, 1.0));
        prop_assert!(penrose_rhs_area_derivative(a, q) > 0.0);
    }

    /// The order-preserving parallel map agrees with the sequential one.
    #[test]
    fn par_map_matches_sequential(xs in proptest::collection::vec(-1e6f64..1e6, 0..200)) {
        let f = |x: &f64| x.sin() * x.abs().sqrt();
        prop_assert_eq!(qlpen::par::map(&xs, f), qlpen::par::map_seq(&xs, f));
    }
}
