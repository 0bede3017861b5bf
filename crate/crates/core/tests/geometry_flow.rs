use std::f64::consts::PI;

use eqmorse::flow::{flow_for, flow_segment, flow_until_rest, local_invariant_frames, IntegratorOptions};
use eqmorse::geometry::{CircleAction, EmbeddedManifold, Polynomial, ScalarField};
use nalgebra::DVector;
use proptest::prelude::*;

fn field(expr: &str, n: usize) -> ScalarField {
    ScalarField::new(Polynomial::parse(expr, n).unwrap())
}

fn point3() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-2.0f64..2.0, 3).prop_filter_map("away from the origin", |v| {
        let p = DVector::from_vec(v);
        (p.norm() > 0.3).then_some(p)
    })
}

fn point4() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, 4).prop_filter_map("away from the origin", |v| {
        let p = DVector::from_vec(v);
        (p.norm() > 0.3).then_some(p)
    })
}

/// Point of the torus `(|(x2, x3)| - R)^2 + x1^2 = r^2` in closed form.
fn torus_point(u: f64, v: f64) -> DVector<f64> {
    let (big, small) = (2.0, 1.0);
    let rho = big + small * v.cos();
    DVector::from_vec(vec![small * v.sin(), rho * u.cos(), rho * u.sin()])
}

proptest! {
    #[test]
    fn sphere_retraction_is_normalization(q in point3()) {
        let m = EmbeddedManifold::sphere(3);
        let scaled = q.normalize() * 1.2;
        let r = m.retract(&scaled).unwrap();
        prop_assert!((r - q.normalize()).norm() < 1e-12);
    }

    #[test]
    fn tangent_projection_is_idempotent_and_tangent(u in 0.0..2.0 * PI, v in 0.0..2.0 * PI, w in prop::collection::vec(-1.0f64..1.0, 3)) {
        let m = EmbeddedManifold::torus(2.0, 1.0);
        let p = torus_point(u, v);
        let w = DVector::from_vec(w);
        let once = m.tangent_project(&p, &w);
        let twice = m.tangent_project(&p, &once);
        prop_assert!((&once - &twice).norm() < 1e-12);
        prop_assert!((m.jacobian(&p) * &once).norm() < 1e-10);
        prop_assert!(m.constraint_norm(&p) < 1e-12);
    }

    #[test]
    fn hopf_action_is_an_isometric_group_action(p in point4(), q in point4(), s in -7.0f64..7.0, t in -7.0f64..7.0) {
        let m = EmbeddedManifold::sphere(4);
        let a = CircleAction::hopf();
        let (p, q) = (p.normalize(), q.normalize());
        let sp = a.act(&m, s, &p).unwrap();
        let sq = a.act(&m, s, &q).unwrap();
        prop_assert!(((&sp - &sq).norm() - (&p - &q).norm()).abs() < 1e-12);
        prop_assert!((sp.norm() - 1.0).abs() < 1e-12);
        let composed = a.act(&m, t, &sp).unwrap();
        let direct = a.act(&m, s + t, &p).unwrap();
        prop_assert!((composed - direct).norm() < 1e-11);
    }

    #[test]
    fn rotation_has_period_two_pi_over_weight(p in point3(), s in 0.0f64..7.0, w in 1i64..4) {
        let m = EmbeddedManifold::sphere(3);
        let a = CircleAction::plane_rotation(3, 0, 1, w);
        let p = p.normalize();
        let shifted = a.act(&m, s + 2.0 * PI / w as f64, &p).unwrap();
        prop_assert!((shifted - a.act(&m, s, &p).unwrap()).norm() < 1e-11);
    }
}

fn polar(p: &DVector<f64>) -> f64 {
    p[2].clamp(-1.0, 1.0).acos()
}

#[test]
fn sphere_height_flow_matches_closed_form() {
    // f = x3 on the unit sphere: tan(θ/2) decays like e^{-t}, θ the polar angle.
    let m = EmbeddedManifold::sphere(3);
    let f = field("x3", 3);
    let opts = IntegratorOptions::default();
    let theta0: f64 = 2.5;
    let p0 = DVector::from_vec(vec![theta0.sin() * 0.6, theta0.sin() * 0.8, theta0.cos()]);
    for t in [0.5, 1.0, 3.0, 6.0] {
        let p = flow_for(&m, &f, &p0, t, &opts).unwrap();
        let expected = 2.0 * ((theta0 / 2.0).tan() * (-t as f64).exp()).atan();
        assert!(
            (polar(&p) - expected).abs() < 1e-8,
            "t = {t}: {} vs {expected}",
            polar(&p)
        );
        // The azimuth is preserved.
        assert!((p[1] * 0.6 - p[0] * 0.8).abs() < 1e-9);
    }
}

#[test]
fn circle_flow_matches_closed_form() {
    let m = EmbeddedManifold::sphere(2);
    let f = field("x1", 2);
    let phi0: f64 = 3.0;
    let p0 = DVector::from_vec(vec![phi0.cos(), phi0.sin()]);
    let p = flow_for(&m, &f, &p0, 2.0, &IntegratorOptions::default()).unwrap();
    let expected = 2.0 * ((phi0 / 2.0).tan() * (-2.0f64).exp()).atan();
    assert!((p[1].atan2(p[0]) - expected).abs() < 1e-8);
}

#[test]
fn backward_segment_ends_at_the_start() {
    let m = EmbeddedManifold::torus(2.0, 1.0);
    let f = field("x3 + 0.25*x1", 3);
    let p = torus_point(0.3, 1.0);
    let seg = flow_segment(&m, &f, &p, -2.0, &IntegratorOptions::default()).unwrap();
    assert!(seg.samples.windows(2).all(|w| w[0].0 < w[1].0));
    assert!((seg.samples[0].0 + 2.0).abs() < 1e-12);
    assert!((seg.last() - &p).norm() < 1e-14);
    assert!(seg.monotonicity_violation(&f) < 1e-9);
}

#[test]
fn torus_trajectories_keep_invariants() {
    let m = EmbeddedManifold::torus(2.0, 1.0);
    let f = field("x3 + 0.25*x1 + 0.1*x1*x2", 3);
    let opts = IntegratorOptions::default();
    for (u, v) in [(0.1, 0.2), (2.0, 4.0), (4.5, 1.3), (-1.2, 2.9)] {
        let t = flow_until_rest(&m, &f, &torus_point(u, v), 200.0, false, &opts).unwrap();
        assert!(t.monotonicity_violation(&f) < 1e-9);
        assert!(t.constraint_drift(&m) < 1e-8);
        let vals = t.f_values(&f);
        assert!(vals.last().unwrap() >= vals.first().unwrap());
    }
}

#[test]
fn sphere_pole_frames() {
    // Tangent Hessian of x3 at the poles is -x3 * identity.
    let m = EmbeddedManifold::sphere(3);
    let f = field("x3", 3);
    let south = local_invariant_frames(&m, &f, &DVector::from_vec(vec![0.0, 0.0, -1.0])).unwrap();
    assert_eq!(south.unstable_dim(), 2);
    assert!(south.spectrum().iter().all(|v| (v - 1.0).abs() < 1e-9));
    let north = local_invariant_frames(&m, &f, &DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
    assert_eq!(north.unstable_dim(), 0);
    assert!(north.spectrum().iter().all(|v| (v + 1.0).abs() < 1e-9));
}

#[test]
fn degenerate_points_are_rejected() {
    let m = EmbeddedManifold::sphere(3);
    let f = field("x3^3", 3);
    assert!(local_invariant_frames(&m, &f, &DVector::from_vec(vec![1.0, 0.0, 0.0])).is_err());
}
