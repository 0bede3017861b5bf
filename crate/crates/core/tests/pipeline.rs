use std::f64::consts::PI;
use std::fs;

use eqmorse::export::{export_trajectories, read_cache, Selection, CACHE_FILE};
use eqmorse::pipeline::{run_scenario, Cache, RunOptions, Status, Step};
use eqmorse::scenario::{find_builtin, ScenarioConfig};
use eqmorse::Error;

fn run(id: &str, step: Step) -> eqmorse::pipeline::Run {
    run_scenario(
        &find_builtin(id).unwrap(),
        &RunOptions {
            step,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn free_circle_end_to_end() {
    let r = run("circle-w1", Step::Homology);
    assert_eq!(r.status(), Status::Pass);
    let e = r.report.equivariant.as_ref().unwrap();
    assert_eq!(e.homology.dims, vec![1, 0, 0, 0, 0, 0, 0, 0, 0]);
    assert!(e.square.zero);
}

#[test]
fn reports_are_byte_identical() {
    let a = run("torus-rot", Step::Homology).report.to_toml();
    let b = run("torus-rot", Step::Homology).report.to_toml();
    assert_eq!(a, b);
    assert!(!a.contains("elapsed"));
}

#[test]
fn wrong_expectation_is_a_mismatch() {
    let opts = RunOptions {
        expected: Some(vec![1, 1, 0, 0, 0, 0, 0, 0, 0]),
        ..Default::default()
    };
    let r = run_scenario(&find_builtin("circle-w1").unwrap(), &opts).unwrap();
    assert_eq!(r.status(), Status::Mismatch);
    assert_eq!(r.status().exit_code(), 3);
}

#[test]
fn symmetric_hopf_is_inconclusive() {
    let r = run("s3-hopf-symmetric", Step::Homology);
    assert_eq!(r.status(), Status::Inconclusive);
    assert_eq!(r.status().exit_code(), 2);
    assert!(r.report.message.unwrap().contains("non-transversal"));
    assert!(r.cache.is_none());
}

#[test]
fn forced_perturbation_is_recorded_and_harmless() {
    let mut c = find_builtin("circle-w2").unwrap();
    c.perturbation.always = true;
    let r = run_scenario(&c, &RunOptions::default()).unwrap();
    assert_eq!(r.status(), Status::Pass);
    let seed = r.report.attempts[0].perturbation_seed.unwrap();
    assert_eq!(r.cache.as_ref().unwrap().perturbation_seed, Some(seed));
    assert_ne!(r.report.function, "x1");
    let again = run_scenario(&c, &RunOptions::default()).unwrap();
    assert_eq!(again.report.to_toml(), r.report.to_toml());
}

#[test]
fn count_inconsistencies_are_retried_on_finer_grids() {
    // A coarse perturbation whose base grid misses a jump root.
    let mut c = find_builtin("torus-rot").unwrap();
    c.seed = 1012;
    c.perturbation.amplitude = 0.2;
    c.perturbation.always = true;
    c.perturbation.retries = 0;
    let r = run_scenario(&c, &RunOptions::default()).unwrap();
    let attempts = &r.report.attempts;
    assert!(attempts[0].outcome.contains("d^2"), "{attempts:?}");
    let last = attempts.last().unwrap();
    assert_eq!(last.outcome, "ok");
    assert!(last.grid_scale > 1);
    assert!(attempts.iter().all(|a| a.attempt == 0));
    assert_eq!(r.report.settings.angle_grid, 64 * last.grid_scale);
    assert!(r.report.equivariant.as_ref().unwrap().square.zero);
}

#[test]
fn trivial_actions_match_the_tensor_expansion() {
    for id in ["circle-trivial", "sphere-trivial", "torus-trivial"] {
        let r = run(id, Step::Homology);
        assert_eq!(r.status(), Status::Pass, "{id}: {:?}", r.report.message);
    }
}

#[test]
fn validation_failure_stops_early() {
    let mut c: ScenarioConfig = find_builtin("circle-w1").unwrap();
    c.action = eqmorse::scenario::ActionSpec::Generator {
        rows: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        weight: None,
    };
    let r = run_scenario(&c, &RunOptions::default()).unwrap();
    assert_eq!(r.status(), Status::Inconclusive);
    assert!(r.report.message.unwrap().contains("validation failed"));
}

#[test]
fn free_circle_export_has_two_segments_and_one_jump_at_pi() {
    let dir = tempfile::tempdir().unwrap();
    let r = run("circle-w1", Step::Homology);
    let cache = r.cache.unwrap();
    fs::write(dir.path().join(CACHE_FILE), cache.to_toml()).unwrap();
    let back = read_cache(dir.path()).unwrap();
    assert_eq!(back, cache);

    let out = dir.path().join("csv");
    export_trajectories(&back, Selection::JumpLines, &out).unwrap();
    let line = fs::read_to_string(out.join("jump_k1_x1.0_x0.0_0.csv")).unwrap();
    let segments: std::collections::BTreeSet<&str> =
        line.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(segments.len(), 2);
    let jumps = fs::read_to_string(out.join("jumps.csv")).unwrap();
    let rows: Vec<&str> = jumps.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let s: f64 = rows[0].split(',').nth(3).unwrap().parse().unwrap();
    assert!((s - PI).abs() < 1e-6);
}

#[test]
fn exported_flow_lines_join_their_end_points() {
    let dir = tempfile::tempdir().unwrap();
    let r = run("torus-rot", Step::Morse);
    let cache = r.cache.unwrap();
    assert_eq!(cache.flow_lines.len(), 8);
    let files = export_trajectories(&cache, Selection::FlowLines, dir.path()).unwrap();
    assert_eq!(files.len(), 8);
    let crits = &r.report.critical_points;
    for (path, l) in files.iter().zip(&cache.flow_lines) {
        let text = fs::read_to_string(path).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        let at = |row: &Vec<f64>| row[1..4].to_vec();
        let near = |p: Vec<f64>, id: &str| {
            let c = crits.iter().find(|c| c.id == id).unwrap();
            p.iter()
                .zip(&c.location)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        assert!(near(at(&rows[0]), &l.source) < 2e-3, "{}", path.display());
        let end = near(at(rows.last().unwrap()), &l.target);
        assert!(
            end < 1e-4,
            "{}: {end:e} {} rows, last {:?}",
            path.display(),
            rows.len(),
            rows.last()
        );
    }
}

#[test]
fn sphere_rotation_exports_no_jump_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cache = run("sphere-rot", Step::Homology).cache.unwrap();
    assert!(cache.jump_lines.is_empty());
    let files = export_trajectories(&cache, Selection::JumpLines, dir.path()).unwrap();
    assert!(files.is_empty());
}

#[test]
fn missing_cache_is_explained() {
    let dir = tempfile::tempdir().unwrap();
    match read_cache(dir.path()) {
        Err(Error::Cache(msg)) => assert!(msg.contains("run `eqmorse")),
        other => panic!("expected a cache error, got {other:?}"),
    }
    assert!(Cache::from_toml("flow_lines = 3").is_err());
}
