//! Corner smoothing: spike structure, repairs and horizon tracking.

use std::f64::consts::PI;

use qlpen::corner::*;
use qlpen::extension::Variant;
use qlpen::numerics::{linspace, trapz};
use qlpen::{QlError, RNParams, RadialProfile};

/// Cone-like sides `b = b₀ + β s` with constant charges, meeting at `b₀ = 2`
/// with `H₋ = 0.5`, `H₊ = 0.3`, `Φ₋ = 0.05`, `Φ₊ = 0.1`.
fn jump_corner() -> ChargedCornerData {
    let side = |beta: f64, q: f64| move |s: f64| [2.0 + beta * s, beta, 0.0, q, 0.0];
    let inner = CollarSide::from_fn(linspace(-1.0, 0.0, 200), side(0.5, 0.2)).unwrap();
    let outer = CollarSide::from_fn(linspace(0.0, 1.0, 200), side(0.3, 0.4)).unwrap();
    ChargedCornerData::new(inner, outer).unwrap()
}

fn rn(m: f64, q: f64) -> RNParams {
    RNParams::new(m, q).unwrap()
}

fn glued(inner: RNParams, outer: RNParams) -> ChargedCornerData {
    ChargedCornerData::rn_glue(&inner, &outer, 3.0, 2000.0).unwrap()
}

#[test]
fn corner_condition_examples() {
    let a = corner_conditions(0.5, 0.3, 0.05, 0.1, 0.0, None, Variant::A);
    assert!(a.pass);
    assert!((a.mean_curvature - 0.1).abs() < 1e-15);
    let b = corner_conditions(0.3, 0.5, 0.1, 0.1, 0.0, None, Variant::B);
    assert!(!b.pass);
    let c = corner_conditions(0.4, 0.4, 0.1, 0.2, 0.0, None, Variant::C);
    assert!(c.pass);
    assert_eq!(c.flux, Some(0.1));
    // Area-charge bound of variant A: Q_∞² ≤ |Σ_H|/4π.
    let bad = corner_conditions(0.5, 0.3, 0.1, 0.1, 2.0, Some(4.0 * PI * 3.24), Variant::A);
    assert!(!bad.pass);
}

#[test]
fn rn_gluing_orientation() {
    // Mean curvature 2V/r decreases with the mass, so the heavier slice
    // must be outside for H₋ ≥ H₊.
    let ok = glued(rn(1.0, 0.5), rn(1.2, 0.5));
    assert!(check_corner_conditions(&ok, Variant::A).pass);
    let r: f64 = 3.0;
    assert!((ok.h_minus - 2.0 * rn(1.0, 0.5).potential(r) / r).abs() < 1e-12);
    assert!((ok.h_plus - 2.0 * rn(1.2, 0.5).potential(r) / r).abs() < 1e-12);
    let swapped = glued(rn(1.2, 0.5), rn(1.0, 0.5));
    assert!(!check_corner_conditions(&swapped, Variant::A).pass);
    assert!(!check_corner_conditions(&swapped, Variant::B).pass);
}

#[test]
fn mismatched_radii_are_rejected() {
    let inner = CollarSide::from_fn(linspace(-1.0, 0.0, 50), |s| [2.0 + s, 1.0, 0.0, 0.0, 0.0]).unwrap();
    let outer = CollarSide::from_fn(linspace(0.0, 1.0, 50), |s| [2.1 + s, 1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!(matches!(ChargedCornerData::new(inner, outer), Err(QlError::Domain(_))));
}

#[test]
fn rn_sides_reproduce_closed_forms() {
    let p = rn(1.0, 0.6);
    let side = CollarSide::rn_inner(&p, 3.0, 2000).unwrap();
    assert!((side.b[0] - 1.8).abs() < 1e-14);
    assert!(side.b_s[0].abs() < 1e-14);
    // Proper distance from the horizon to r = 3 by independent quadrature
    // of dr/V with the substitution r = r₊ + x².
    let xs = linspace(0.0, (3.0f64 - 1.8).sqrt(), 20001);
    let integrand: Vec<f64> = xs.iter().map(|x| 2.0 * (1.8 + x * x) / (1.8 + x * x - 0.2).sqrt()).collect();
    let length = trapz(&xs, &integrand);
    assert!((-side.s_min() - length).abs() < 1e-7, "{} vs {length}", -side.s_min());
    for &s in &[-1.0, -0.3, -1e-3] {
        let v = side.eval(s);
        assert!((v.b_s - p.potential(v.b)).abs() < 1e-9);
        assert!((v.scalar_curvature() - p.scalar_curvature(v.b)).abs() < 1e-7);
    }
}

#[test]
fn inner_zone_integrals_match_the_jumps() {
    // The scalar-curvature spike integrates to 2(H₋ − H₊) (from
    // R = −2∂_s H + bounded) and the divergence spike to Φ₊ − Φ₋ (flux
    // balance across the collar).
    let corner = jump_corner();
    for (delta, tol) in [(1e-1, 1e-3), (1e-2, 1e-5), (1e-3, 1e-6)] {
        let z = smooth_corner(&corner, delta).unwrap().inner_zone_integrals();
        assert!((z.scalar_curvature - 0.4).abs() < tol * 0.4, "δ={delta}: {}", z.scalar_curvature);
        assert!((z.divergence - 0.05).abs() < tol * 0.05, "δ={delta}: {}", z.divergence);
        assert!((z.width - delta * delta / 25.0).abs() < 1e-12 * delta);
    }
}

#[test]
fn spike_follows_the_mollifier_profile() {
    let data = smooth_corner(&jump_corner(), 1e-2).unwrap();
    let eta = data.metric.eta;
    for i in 0..data.s().len() {
        let s = data.s()[i];
        if s.abs() < 0.5 * eta {
            let rel = (data.metric.r_spike[i] - data.metric.spike_model[i]).abs() / data.metric.spike_model[i];
            assert!(rel < 1e-3, "s/η = {}: {rel}", s / eta);
        }
    }
}

#[test]
fn smooth_gluing_has_no_spike() {
    let corner = glued(rn(1.0, 0.6), rn(1.0, 0.6));
    assert!((corner.h_minus - corner.h_plus).abs() < 1e-12);
    let mut sups = vec![];
    for delta in [4e-2, 2e-2, 1e-2, 5e-3] {
        let d = smooth_corner(&corner, delta).unwrap();
        let sup = (0..d.s().len())
            .map(|i| (d.metric.r_spike[i] - d.metric.base_r[i]).abs())
            .fold(0.0, f64::max);
        let div = d.field.div_spike.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(div < 1e-8, "δ={delta}: div {div}");
        sups.push(sup);
    }
    for w in sups.windows(2) {
        assert!(w[1] <= 2.0 * w[0] + 1e-6, "no δ⁻² growth: {sups:?}");
    }
    assert!(sups.iter().all(|s| *s < 1e-4), "{sups:?}");
}

#[test]
fn equal_flux_gives_bounded_divergence() {
    // Same charge, different masses: Φ₊ = Φ₋, H jumps.
    let corner = glued(rn(1.0, 0.5), rn(1.2, 0.5));
    let sups: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&d| {
            let data = smooth_corner(&corner, d).unwrap();
            data.field.div_spike.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        })
        .collect();
    assert!(sups.iter().all(|s| *s < 1e-3), "{sups:?}");
}

#[test]
fn smoothing_is_local_and_preserves_charge() {
    let corner = jump_corner();
    for delta in [1e-1, 1e-2] {
        let d = smooth_corner(&corner, delta).unwrap();
        assert_eq!(d.outside_collar_deviation(), (0.0, 0.0));
        let q_end = *d.field.q.last().unwrap();
        assert!((q_end - corner.q_inf).abs() < 1e-14);
        // h̃ vanishes outside the collar.
        for i in 0..d.s().len() {
            if d.s()[i].abs() >= 0.5 * delta {
                assert_eq!(d.field.h_bounded[i], 0.0);
            }
        }
    }
}

#[test]
fn mollified_metric_is_consistent() {
    // b_s and b_ss agree with differences of the sampled b across the blend
    // zone, so g_δ is C² there.
    let delta = 1e-2;
    let d = smooth_corner(&jump_corner(), delta).unwrap();
    let db = qlpen::numerics::deriv_nonuniform(d.s(), &d.metric.b, 1, 5);
    let ddb = qlpen::numerics::deriv_nonuniform(d.s(), &d.metric.b_s, 1, 5);
    for i in 2..d.s().len() - 2 {
        let s = d.s()[i].abs();
        if s > 0.2 * delta && s < 0.6 * delta {
            assert!((db[i] - d.metric.b_s[i]).abs() < 1e-8, "s={s}");
            assert!((ddb[i] - d.metric.b_ss[i]).abs() < 1e-4, "s={s}: {} vs {}", ddb[i], d.metric.b_ss[i]);
        }
    }
}

#[test]
fn collar_collision_is_a_domain_error() {
    let corner = jump_corner();
    assert!(matches!(smooth_corner(&corner, 2.5), Err(QlError::Domain(_))));
}

#[test]
fn two_ended_solve_matches_flux_integral() {
    // Flat space b = s on [1, 400]: Δf = h with a bump h on [2, 3]. The
    // two-ended solution has r²f' = ∫₁^r h b² ds (Neumann at s = 1 by
    // symmetry) and f = −(∫ h b²)/r beyond the bump.
    let s: Vec<f64> = qlpen::numerics::logspace(1.0, 400.0, 6000);
    let b = s.clone();
    let h: Vec<f64> = s
        .iter()
        .map(|&x| if x > 2.0 && x < 3.0 { ((x - 2.0) * (3.0 - x)).powi(2) } else { 0.0 })
        .collect();
    let sol = two_ended_solve(&s, &b, 1.0, &vec![0.0; s.len()], &h, 0.0).unwrap();
    let w: Vec<f64> = (0..s.len()).map(|i| h[i] * b[i] * b[i]).collect();
    let total = trapz(&s, &w);
    for i in (0..s.len()).filter(|&i| s[i] > 5.0).step_by(500) {
        assert!((sol.y[i] + total / s[i]).abs() < 1e-6 * total, "s={}", s[i]);
        assert!((sol.dy[i] * s[i] * s[i] - total).abs() < 1e-4 * total);
    }
    assert!(sol.dy[0].abs() < 1e-12);
    assert!(sol.asymmetry < 1e-12 * total, "{}", sol.asymmetry);
    // Zero data gives the zero solution exactly.
    let zero = two_ended_solve(&s, &b, 1.0, &vec![0.0; s.len()], &vec![0.0; s.len()], 0.0).unwrap();
    assert!(zero.y.iter().all(|v| *v == 0.0));
}

#[test]
fn conformal_repair_on_the_glued_rn_family() {
    let corner = glued(rn(1.0, 0.5), rn(1.2, 0.5));
    let mut devs = vec![];
    for delta in [1e-1, 5e-2, 1e-2, 1e-3] {
        let data = smooth_corner(&corner, delta).unwrap();
        let rep = conformal_repair(&data, Variant::A, 1e-3).unwrap();
        assert!(rep.energy_pass, "δ={delta}: {}", rep.worst_margin);
        assert!(rep.worst_margin >= -ENERGY_SLACK);
        assert!(rep.horizon_area_drift.abs() < 1e-2);
        assert!((rep.m_adm - 1.2).abs() < 1e-4, "δ={delta}: {}", rep.m_adm);
        assert!((rep.q_inf - 0.5).abs() < 1e-12);
        assert!(rep.u.iter().all(|u| *u >= 1.0 - 1e-15), "superharmonic u stays above 1");
        devs.push(rep.max_deviation);
    }
    assert!(devs[1] < devs[0] && devs[2] < devs[1], "{devs:?}");
    assert!(devs[3] < 1e-8);
}

#[test]
fn conformal_repair_with_a_charge_jump() {
    // Variant A with Φ₊ ≠ Φ₋: the divergence spike enters the energy
    // functional, and the repaired inequality still holds pointwise.
    let corner = glued(rn(1.0, 0.5), rn(1.2, 0.4));
    assert!(check_corner_conditions(&corner, Variant::A).pass);
    let data = smooth_corner(&corner, 1e-2).unwrap();
    let rep = conformal_repair(&data, Variant::A, 1e-3).unwrap();
    assert!(rep.energy_pass);
    assert!((rep.m_adm - 1.2).abs() < 1e-4);
    assert!((rep.q_inf - 0.4).abs() < 1e-12);
}

#[test]
fn conformal_repair_signals_retry() {
    let corner = glued(rn(1.0, 0.5), rn(1.2, 0.5));
    let data = smooth_corner(&corner, 1e-1).unwrap();
    match conformal_repair(&data, Variant::A, 1e-12) {
        Err(QlError::ShrinkDelta { deviation, eps }) => assert!(deviation >= eps),
        other => panic!("expected a retry signal, got {other:?}"),
    }
    assert!(matches!(conformal_repair(&data, Variant::A, 1.5), Err(QlError::Domain(_))));
}

#[test]
fn repairs_need_a_minimal_sphere() {
    let data = smooth_corner(&jump_corner(), 1e-2).unwrap();
    assert!(matches!(conformal_repair(&data, Variant::A, 1e-3), Err(QlError::Domain(_))));
    assert!(matches!(divergence_repair(&data), Err(QlError::Domain(_))));
}

#[test]
fn divergence_repair_sequence() {
    // Charge drops across Σ (Φ₊ < Φ₋): variant-B orientation.
    let corner = glued(rn(1.0, 0.5), rn(1.2, 0.4));
    assert!(check_corner_conditions(&corner, Variant::B).pass);
    let reps: Vec<DivergenceRepair> = [2e-2, 1e-2, 5e-3]
        .iter()
        .map(|&d| divergence_repair(&smooth_corner(&corner, d).unwrap()).unwrap())
        .collect();
    for w in reps.windows(2) {
        assert!(w[1].grad_l2 <= 0.7 * w[0].grad_l2, "{} -> {}", w[0].grad_l2, w[1].grad_l2);
    }
    for r in &reps {
        assert!(r.q_drift.abs() < 1e-3);
        assert!(r.neumann_residual < 1e-10);
        assert!(r.div_hat_max <= 1e-12, "∇·Ê ≤ 0: {}", r.div_hat_max);
        assert_eq!(r.lp.len(), 4);
        assert!(r.lp.iter().all(|n| n.norm.is_finite() && n.norm >= 0.0));
    }
}

#[test]
fn divergence_repair_with_prescribed_remainders() {
    let corner = glued(rn(1.0, 0.5), rn(1.2, 0.4));
    let data = smooth_corner(&corner, 1e-2).unwrap();
    let n = data.s().len();
    let zero = divergence_repair_with(&data, &vec![0.0; n]).unwrap();
    assert!(zero.f.iter().all(|v| *v == 0.0));
    assert_eq!(zero.phi_hat, data.field.phi);
    // Bump in the collar with volume integral 0.01: the charge at infinity
    // moves by −0.01/4π.
    let s = data.s();
    let shape: Vec<f64> = s
        .iter()
        .map(|&x| {
            let t = x / 4e-3;
            if t.abs() < 1.0 {
                (1.0 - t * t).powi(3)
            } else {
                0.0
            }
        })
        .collect();
    let vol: Vec<f64> = (0..n).map(|i| shape[i] * 4.0 * PI * data.metric.b[i].powi(2)).collect();
    let scale = 0.01 / trapz(s, &vol);
    let h: Vec<f64> = shape.iter().map(|v| v * scale).collect();
    let rep = divergence_repair_with(&data, &h).unwrap();
    let expected = -0.01 / (4.0 * PI);
    assert!(rep.q_drift.abs() < 1e-3);
    assert!((rep.q_drift - expected).abs() < 1e-6, "{} vs {expected}", rep.q_drift);
}

#[test]
fn outermost_horizon_examples() {
    let side = CollarSide::rn_inner(&rn(1.0, 0.6), 40.0, 4000).unwrap();
    let h = outermost_horizon(&side.to_profile()).unwrap();
    assert!((h.area - 4.0 * PI * 3.24).abs() < 1e-10);
    // Two minimal spheres (x = 1 and x = 3): the outer one is returned.
    let x = linspace(0.0, 5.0, 2001);
    let b: Vec<f64> = x.iter().map(|t| 2.0 + 0.1 * (t - 1.0).powi(2) * (t - 3.0).powi(2) + 0.01 * t).collect();
    let n = x.len();
    let twin = RadialProfile { x: x.clone(), a: vec![1.0; n], b, q: vec![0.0; n] };
    let h = outermost_horizon(&twin).unwrap();
    assert!((h.location - 3.0).abs() < 0.02, "{}", h.location);
    // Strictly increasing areal radius: no minimal sphere.
    let mono = RadialProfile { x: x.clone(), a: vec![1.0; n], b: x.iter().map(|t| 1.0 + t).collect(), q: vec![0.0; n] };
    assert!(matches!(outermost_horizon(&mono), Err(QlError::NoMinimalSphere)));
}

#[test]
fn conformal_divergence_identity() {
    let s = linspace(1.0, 5.0, 801);
    let b: Vec<f64> = s.iter().map(|x| x + 0.1 * x.sin()).collect();
    let e: Vec<f64> = s.iter().map(|x| 0.3 / (x * x) + 0.05 * (2.0 * x).cos()).collect();
    let u: Vec<f64> = s.iter().map(|x| 1.0 + 0.4 * (0.7 * x).sin().powi(2)).collect();
    assert!(conformal_divergence_defect(&s, &b, &e, &u) < 1e-10);
}
