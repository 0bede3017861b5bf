use std::f64::consts::PI;

use eqmorse::equivariant::{assemble_d_s1, surface_jump_pattern, verify_d_squared};
use eqmorse::geometry::seed_cloud;
use eqmorse::jump::{
    enumerate_k_jump_flow_lines, moduli_dimension, smooth_continuation_crosscheck, ShootingContext, SolverSettings,
};
use eqmorse::morse::{check_morse_inequalities, critical_counts, morse_differential, morse_homology, CriticalPoint};
use eqmorse::pipeline::{all_jumps, critical_points, jump_counts, Scenario};
use eqmorse::scenario::find_builtin;
use eqmorse::Error;

struct Setup {
    scenario: Scenario,
    crits: Vec<CriticalPoint>,
    settings: SolverSettings,
}

impl Setup {
    fn new(id: &str) -> Self {
        let config = find_builtin(id).unwrap();
        let scenario = Scenario::new(&config).unwrap();
        let cloud = seed_cloud(&scenario.manifold, 30);
        let crits = critical_points(&scenario.manifold, &scenario.function, &cloud, 30).unwrap();
        Self {
            scenario,
            crits,
            settings: config.settings(),
        }
    }

    fn ctx(&self) -> ShootingContext<'_> {
        ShootingContext {
            manifold: &self.scenario.manifold,
            function: &self.scenario.function,
            action: &self.scenario.action,
            crits: &self.crits,
            settings: &self.settings,
        }
    }

    fn pos(&self, id: &str) -> usize {
        self.crits.iter().position(|c| c.id == id).unwrap()
    }
}

fn wrap(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

#[test]
fn circle_jump_roots_sit_where_the_rotation_hits_the_minimum() {
    // σ_s(1, 0) = (cos ws, sin ws) equals (-1, 0) exactly for s = (2j + 1)π / w.
    for (id, w) in [("circle-w1", 1), ("circle-w2", 2), ("circle-w3", 3)] {
        let s = Setup::new(id);
        let e = enumerate_k_jump_flow_lines(&s.ctx(), s.pos("x1.0"), s.pos("x0.0"), 1).unwrap();
        assert_eq!(e.solutions.len(), w, "{id}");
        assert_eq!(e.parity(), w % 2 == 1);
        let mut found: Vec<f64> = e.solutions.iter().map(|sol| wrap(sol.config.jumps[0])).collect();
        found.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..w).map(|j| (2 * j + 1) as f64 * PI / w as f64).collect();
        for (a, b) in found.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-6, "{id}: {a} vs {b}");
        }
        assert!(e.solutions.iter().all(|sol| sol.certificate.passed));
    }
}

#[test]
fn smooth_continuation_agrees_on_circles() {
    for id in ["circle-w1", "circle-w2", "circle-w3"] {
        let s = Setup::new(id);
        let ctx = s.ctx();
        let (x, y) = (s.pos("x1.0"), s.pos("x0.0"));
        let smooth = smooth_continuation_crosscheck(&ctx, x, y).unwrap();
        let jump = enumerate_k_jump_flow_lines(&ctx, x, y, 1).unwrap();
        assert_eq!(smooth.parity, jump.parity(), "{id}");
    }
}

#[test]
fn torus_morse_layer() {
    let s = Setup::new("torus-rot");
    let idx: Vec<usize> = s.crits.iter().map(|c| c.index).collect();
    assert_eq!(idx, vec![0, 1, 1, 2]);
    let ctx = s.ctx();
    let d = morse_differential(&ctx).unwrap();
    assert_eq!(d.pairs.len(), 4);
    for p in &d.pairs {
        assert_eq!(p.lines.len(), 2, "{} -> {}", p.source, p.target);
        assert!(!p.parity);
    }
    let counts = critical_counts(&s.crits, 2);
    let homology = morse_homology(&s.crits, &d, 2);
    assert_eq!(homology, vec![1, 2, 1]);
    assert!(check_morse_inequalities(&counts, &homology).all_hold());
}

#[test]
fn torus_jump_counts_satisfy_the_surface_pattern() {
    let s = Setup::new("torus-rot");
    let ctx = s.ctx();
    let d = morse_differential(&ctx).unwrap();
    let jumps = all_jumps(&ctx).unwrap();
    assert_eq!(jumps.len(), 4);
    let e = assemble_d_s1(&s.crits, 2, &d, &jump_counts(&s.crits, &jumps)).unwrap();
    assert!(verify_d_squared(&e).zero);
    let pattern = surface_jump_pattern(&e).unwrap();
    assert!(pattern.holds, "{pattern:?}");
    for j in &jumps {
        let smooth = smooth_continuation_crosscheck(&ctx, s.pos(&j.source), s.pos(&j.target)).unwrap();
        assert_eq!(smooth.parity, j.parity(), "{} -> {}", j.source, j.target);
    }
}

#[test]
fn sphere_rotation_has_no_jump_pairs() {
    let s = Setup::new("sphere-rot");
    assert_eq!(s.crits.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 2]);
    assert!(all_jumps(&s.ctx()).unwrap().is_empty());
}

#[test]
fn hopf_sphere_two_jump_count() {
    let s = Setup::new("s3-hopf");
    assert_eq!(s.crits.iter().map(|c| c.index).collect::<Vec<_>>(), vec![0, 3]);
    assert_eq!(moduli_dimension(3, 0, 2), 0);
    let e = enumerate_k_jump_flow_lines(&s.ctx(), s.pos("x3.0"), s.pos("x0.0"), 2).unwrap();
    assert!(e.parity());
}

#[test]
fn symmetric_hopf_sphere_is_non_transversal() {
    let s = Setup::new("s3-hopf-symmetric");
    match enumerate_k_jump_flow_lines(&s.ctx(), s.pos("x3.0"), s.pos("x0.0"), 2) {
        Err(Error::NonTransversal { k, family_dim, .. }) => {
            assert_eq!(k, 2);
            assert!(family_dim > 0);
        }
        other => panic!("expected a non-transversal family, got {other:?}"),
    }
}

#[test]
fn trivial_actions_have_even_jump_counts() {
    let s = Setup::new("torus-trivial");
    for e in all_jumps(&s.ctx()).unwrap() {
        assert!(!e.parity(), "{} -> {}", e.source, e.target);
    }
}

#[test]
fn pairs_outside_the_dimension_formula_are_refused() {
    let s = Setup::new("circle-w1");
    assert!(enumerate_k_jump_flow_lines(&s.ctx(), s.pos("x0.0"), s.pos("x1.0"), 1).is_err());
}
