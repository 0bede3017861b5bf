//! Known-answer and property checks, one status line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use eqmorse::geometry::seed_cloud;
use eqmorse::jump::{enumerate_k_jump_flow_lines, smooth_continuation_crosscheck, ShootingContext};
use eqmorse::pipeline::{critical_points, run_scenario, Run, RunOptions, Scenario, Step};
use eqmorse::scenario::{builtin_scenarios, find_builtin, ScenarioConfig};
use eqmorse::z2t::{snf_over_z2t, PolyMatrix, Z2Poly};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
        }
    }
}

type Check = (Outcome, String);

fn pass_if(ok: bool, detail: String) -> Check {
    (if ok { Outcome::Pass } else { Outcome::Fail }, detail)
}

fn builtin(id: &str) -> ScenarioConfig {
    find_builtin(id).unwrap_or_else(|| panic!("missing built-in {id}"))
}

fn run(config: &ScenarioConfig, step: Step) -> Result<Run, String> {
    let opts = RunOptions {
        step,
        ..RunOptions::default()
    };
    run_scenario(config, &opts).map_err(|e| e.to_string())
}

fn dims(r: &Run) -> Vec<usize> {
    r.report
        .equivariant
        .as_ref()
        .map(|e| e.homology.dims.clone())
        .unwrap_or_default()
}

fn fmt(v: &[usize]) -> String {
    let parts: Vec<String> = v.iter().map(usize::to_string).collect();
    format!("({})", parts.join(","))
}

/// Dimensions of `H ⊗ Z2[T]` with `deg T = 2`, degrees 0..=m.
fn tensor_oracle(betti: &[usize], m: usize) -> Vec<usize> {
    (0..=m)
        .map(|d| {
            (0..=d)
                .filter(|i| (d - i) % 2 == 0)
                .map(|i| betti.get(i).copied().unwrap_or(0))
                .sum()
        })
        .collect()
}

fn known_dims(id: &str, expected: &[usize], limit: Option<f64>) -> Check {
    let start = Instant::now();
    let r = match run(&builtin(id), Step::Homology) {
        Ok(r) => r,
        Err(e) => return (Outcome::Fail, e),
    };
    let secs = start.elapsed().as_secs_f64();
    let got = dims(&r);
    let mut ok = got == expected;
    let mut detail = format!("dims {}", fmt(&got));
    if let Some(l) = limit {
        ok &= secs < l;
        detail.push_str(&format!(", limit {l} s"));
    }
    pass_if(ok, detail)
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let r = match run(&builtin("torus-rot"), Step::Homology) {
        Ok(r) => r,
        Err(e) => return (Outcome::Fail, e),
    };
    let secs = start.elapsed().as_secs_f64();
    let got = dims(&r);
    let Some(p) = r
        .report
        .equivariant
        .as_ref()
        .and_then(|e| e.surface_jump_pattern.as_ref())
    else {
        return (Outcome::Fail, "no R1 block".into());
    };
    // (a, b) != 0, (c, d) != 0, ac + bd = 0 over Z2.
    let holds = (p.a || p.b) && (p.c || p.d) && !((p.a && p.c) ^ (p.b && p.d));
    let ok = got == [1, 1, 0, 0, 0, 0] && holds && secs < 120.0;
    pass_if(
        ok,
        format!(
            "dims {}, (a,b,c,d) = ({},{},{},{})",
            fmt(&got),
            u8::from(p.a),
            u8::from(p.b),
            u8::from(p.c),
            u8::from(p.d)
        ),
    )
}

fn criterion_6() -> Check {
    let cases = [
        ("circle-trivial", vec![1, 1]),
        ("sphere-trivial", vec![1, 0, 1]),
        ("torus-trivial", vec![1, 2, 1]),
        ("s3-trivial", vec![1, 0, 0, 1]),
    ];
    let mut bad = Vec::new();
    for (id, betti) in cases {
        let config = builtin(id);
        match run(&config, Step::Homology) {
            Ok(r) => {
                let m = config.m_max - 1;
                let got = dims(&r);
                if got.len() < m + 1 || got[..=m] != tensor_oracle(&betti, m)[..] {
                    bad.push(format!("{id} {}", fmt(&got)));
                }
            }
            Err(e) => bad.push(format!("{id}: {e}")),
        }
    }
    pass_if(
        bad.is_empty(),
        if bad.is_empty() {
            "4 manifolds".into()
        } else {
            bad.join("; ")
        },
    )
}

/// Amplitude of the random quadratic added for the d^2 checks.
const CHECK_AMPLITUDE: f64 = 0.05;

fn criterion_7() -> Check {
    let mut checked = 0;
    let mut refined = 0;
    let mut failures = Vec::new();
    let mut incomplete = Vec::new();
    for base in builtin_scenarios() {
        let mut runs = vec![base.clone()];
        for i in 0..20 {
            let mut c = base.clone();
            c.seed = 1000 + i;
            c.perturbation.always = true;
            c.perturbation.amplitude = CHECK_AMPLITUDE;
            c.perturbation.retries = 0;
            runs.push(c);
        }
        for c in runs {
            let label = format!("{}#{}", c.id, c.seed);
            match run(&c, Step::Homology) {
                Ok(r) => {
                    if r.report.attempts.iter().any(|a| a.outcome.contains("d^2")) {
                        refined += 1;
                    }
                    match &r.report.equivariant {
                        Some(e) => {
                            checked += 1;
                            if !e.square.zero || e.homology.per_k_identities.iter().any(|&(_, ok)| !ok) {
                                failures.push(label);
                            }
                        }
                        None if c.id == "s3-hopf-symmetric" && !c.perturbation.always => {}
                        None => incomplete.push(label),
                    }
                }
                Err(e) => incomplete.push(format!("{label}: {e}")),
            }
        }
    }
    let detail = format!(
        "{checked} complexes ({refined} after grid refinement), {} failures, {} incomplete",
        failures.len(),
        incomplete.len()
    );
    if !failures.is_empty() {
        (Outcome::Fail, format!("{detail}: {}", failures.join("; ")))
    } else if !incomplete.is_empty() {
        (Outcome::Inconclusive, format!("{detail}: {}", incomplete.join("; ")))
    } else {
        (Outcome::Pass, detail)
    }
}

fn criterion_8() -> Check {
    let mut bad = Vec::new();
    for c in builtin_scenarios() {
        if c.id == "s3-hopf-symmetric" {
            continue;
        }
        match run(&c, Step::Morse) {
            Ok(r) => {
                let Some(m) = &r.report.morse else {
                    bad.push(format!("{}: no Morse layer", c.id));
                    continue;
                };
                if !m.inequalities.all_hold() || !m.inequalities.euler_holds {
                    bad.push(format!("{}: inequalities", c.id));
                }
                let expected: &[usize] = match c.manifold().map(|m| m.intrinsic_dim()).unwrap_or(0) {
                    1 => &[1, 1],
                    2 if c.id.starts_with("torus") => &[1, 2, 1],
                    2 => &[1, 0, 1],
                    _ => &[1, 0, 0, 1],
                };
                if m.homology != expected {
                    bad.push(format!("{}: homology {}", c.id, fmt(&m.homology)));
                }
                if c.id.starts_with("torus") && m.differential.pairs.iter().any(|p| p.parity) {
                    bad.push(format!("{}: odd flow-line count", c.id));
                }
            }
            Err(e) => bad.push(format!("{}: {e}", c.id)),
        }
    }
    pass_if(
        bad.is_empty(),
        if bad.is_empty() {
            "all built-ins".into()
        } else {
            bad.join("; ")
        },
    )
}

fn criterion_9() -> Check {
    let mut worst_mono: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut trajectories = 0;
    let mut flips = 0;
    let mut bad = Vec::new();
    for c in builtin_scenarios() {
        if c.id == "s3-hopf-symmetric" {
            continue;
        }
        match run(&c, Step::Verify) {
            Ok(r) => match &r.report.verification {
                Some(v) => {
                    worst_mono = worst_mono.max(v.worst_monotonicity_violation);
                    worst_drift = worst_drift.max(v.worst_constraint_drift);
                    trajectories += v.trajectories;
                    flips += v.parity_flips.len();
                }
                None => bad.push(format!("{}: {:?}", c.id, r.report.message)),
            },
            Err(e) => bad.push(format!("{}: {e}", c.id)),
        }
    }
    let detail = format!(
        "{trajectories} trajectories, monotonicity {worst_mono:.1e}, drift {worst_drift:.1e}, {flips} parity flips"
    );
    if !bad.is_empty() {
        return (Outcome::Fail, format!("{detail}; {}", bad.join("; ")));
    }
    pass_if(worst_mono < 1e-9 && worst_drift < 1e-8 && flips == 0, detail)
}

fn criterion_10() -> Check {
    let mut compared = 0;
    let mut bad = Vec::new();
    for id in ["circle-w1", "circle-w2", "circle-w3", "torus-rot"] {
        let config = builtin(id);
        let s = Scenario::new(&config).unwrap();
        let settings = config.settings();
        let cloud = seed_cloud(&s.manifold, 30);
        let crits = match critical_points(&s.manifold, &s.function, &cloud, 30) {
            Ok(c) => c,
            Err(e) => return (Outcome::Fail, format!("{id}: {e}")),
        };
        let ctx = ShootingContext {
            manifold: &s.manifold,
            function: &s.function,
            action: &s.action,
            crits: &crits,
            settings: &settings,
        };
        let pairs: Vec<(usize, usize)> = crits
            .iter()
            .enumerate()
            .flat_map(|(x, cx)| {
                crits
                    .iter()
                    .enumerate()
                    .filter(move |(_, cy)| cy.index + 1 == cx.index)
                    .map(move |(y, _)| (x, y))
            })
            .collect();
        for (x, y) in pairs {
            let smooth = smooth_continuation_crosscheck(&ctx, x, y);
            let jump = enumerate_k_jump_flow_lines(&ctx, x, y, 1);
            match (smooth, jump) {
                (Ok(s), Ok(j)) => {
                    compared += 1;
                    if s.parity != j.parity() {
                        bad.push(format!("{id} {} -> {}", crits[x].id, crits[y].id));
                    }
                }
                (Err(e), _) | (_, Err(e)) => bad.push(format!("{id}: {e}")),
            }
        }
    }
    let ok = bad.is_empty() && compared == 7;
    pass_if(
        ok,
        format!(
            "{compared} pairs compared{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!(": {}", bad.join("; "))
            }
        ),
    )
}

fn criterion_11() -> Check {
    let start = Instant::now();
    let r = match run(&builtin("s3-hopf"), Step::Homology) {
        Ok(r) => r,
        Err(e) => return (Outcome::Inconclusive, e),
    };
    let secs = start.elapsed().as_secs_f64();
    let n2 = r.report.jumps.iter().find(|e| e.k == 2);
    let certified = n2.is_some_and(|e| e.parity() && e.solutions.iter().all(|s| s.certificate.passed));
    let got = dims(&r);
    let ok = certified && got == [1, 0, 1, 0, 0, 0] && secs < 600.0;
    let detail = format!("n2 certified odd: {certified}, dims {}", fmt(&got));
    (if ok { Outcome::Pass } else { Outcome::Inconclusive }, detail)
}

fn random_matrix(rng: &mut ChaCha8Rng) -> PolyMatrix {
    let rows = rng.random_range(1..=8);
    let cols = rng.random_range(1..=8);
    PolyMatrix::from_rows(
        (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        let bits: Vec<bool> = (0..6).map(|_| rng.random_bool(0.4)).collect();
                        Z2Poly::from_bits(&bits)
                    })
                    .collect()
            })
            .collect(),
    )
}

fn criterion_12() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut failures = 0;
    for _ in 0..50 {
        let a = random_matrix(&mut rng);
        let ok = snf_over_z2t(&a).is_ok_and(|s| {
            let product = &(&s.left * &s.diagonal) * &s.right;
            let units =
                s.left.determinant().is_ok_and(|d| d.is_one()) && s.right.determinant().is_ok_and(|d| d.is_one());
            let chain = s.invariant_factors().windows(2).all(|w| w[0].divides(&w[1]));
            product == a && s.diagonal.is_diagonal() && units && chain
        });
        failures += usize::from(!ok);
    }
    pass_if(failures == 0, format!("50 matrices, {failures} failures"))
}

fn main() -> ExitCode {
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Check>)> = vec![
        (
            1,
            "free circle, weight 1",
            Box::new(|| known_dims("circle-w1", &[1, 0, 0, 0, 0, 0, 0, 0, 0], Some(5.0))),
        ),
        (
            2,
            "circle, weight 2",
            Box::new(|| known_dims("circle-w2", &[1; 9], None)),
        ),
        (
            3,
            "circle, weight 3",
            Box::new(|| known_dims("circle-w3", &[1, 0, 0, 0, 0, 0, 0, 0, 0], None)),
        ),
        (
            4,
            "2-sphere rotation",
            Box::new(|| known_dims("sphere-rot", &[1, 0, 2, 0, 2, 0, 2, 0, 2], None)),
        ),
        (5, "free torus rotation", Box::new(criterion_5)),
        (6, "trivial actions", Box::new(criterion_6)),
        (7, "d^2 = 0 and per-k identities", Box::new(criterion_7)),
        (8, "Morse layer", Box::new(criterion_8)),
        (9, "numerical invariants and parity stability", Box::new(criterion_9)),
        (10, "smooth and jump parities agree", Box::new(criterion_10)),
        (11, "Hopf 3-sphere (stretch)", Box::new(criterion_11)),
        (12, "Smith normal form properties", Box::new(criterion_12)),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let (outcome, detail) = check();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {n:>2} {:<12} {secs:>8.2} s  {name}: {detail}",
            outcome.label()
        );
        failed += usize::from(outcome == Outcome::Fail);
    }
    println!("{failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
