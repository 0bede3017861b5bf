//! Scenario execution: validate, critical points, Morse differential, jump
//! counts, assembly, verification and cohomology, with automatic
//! perturbation of the function when a computation is inconclusive.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equivariant::{
    assemble_d_s1, equivariant_homology, surface_jump_pattern, verify_d_squared, EquivariantDifferential,
    HomologyTable, JumpCounts, SquareReport, SurfaceJumpPattern,
};
use crate::error::{Error, Result};
use crate::export::{flow_line_trajectory, jump_line_trajectory};
use crate::flow::IntegratorOptions;
use crate::geometry::{
    seed_cloud, validate_scenario, CircleAction, EmbeddedManifold, Polynomial, ScalarField, ValidationReport,
};
use crate::jump::{
    broken_limit_diagnostics, enumerate_k_jump_flow_lines, find_family_point, jump_problems, segments,
    smooth_continuation_crosscheck, FamilyDiagnostics, JumpEnumeration, SeedSpec, ShootingContext, SmoothCount,
    SolverSettings,
};
use crate::morse::{
    check_morse_inequalities, critical_counts, find_critical_points, morse_differential, morse_homology, CriticalPoint,
    CriticalSummary, MorseDifferential, MorseInequalityReport,
};
use crate::scenario::ScenarioConfig;

/// Largest f-decrease tolerated along an exported trajectory segment.
pub const MONOTONICITY_TOL: f64 = 1e-9;
/// Largest constraint residual tolerated along an exported trajectory.
pub const DRIFT_TOL: f64 = 1e-8;
/// Grid doublings tried when the assembled complex fails d^2 = 0.
pub const GRID_ESCALATIONS: u32 = 2;

/// How far the pipeline runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    Validate,
    Critical,
    Morse,
    Jumps,
    Homology,
    Verify,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub step: Step,
    pub m_max: Option<usize>,
    pub seed: Option<u64>,
    pub expected: Option<Vec<usize>>,
    pub settings: Option<SolverSettings>,
    /// Lattice points per axis for the critical-point search.
    pub search_resolution: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            step: Step::Homology,
            m_max: None,
            seed: None,
            expected: None,
            settings: None,
            search_resolution: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Inconclusive,
    Mismatch,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Inconclusive => 2,
            Status::Mismatch => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation_seed: Option<u64>,
    /// Factor applied to the angle and duration grids.
    pub grid_scale: usize,
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorseSection {
    pub critical_counts: Vec<usize>,
    pub homology: Vec<usize>,
    pub inequalities: MorseInequalityReport,
    pub differential: MorseDifferential,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivariantSection {
    pub k_max: usize,
    pub square: SquareReport,
    pub homology: HomologyTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface_jump_pattern: Option<SurfaceJumpPattern>,
}

/// Parity of one count under a changed numerical setting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParityFlip {
    pub variant: String,
    pub source: String,
    pub target: String,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyRecord {
    pub source: String,
    pub target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FamilyDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unresolved: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifySection {
    pub smooth: Vec<SmoothCount>,
    pub smooth_agrees: bool,
    pub variants: Vec<String>,
    pub parity_flips: Vec<ParityFlip>,
    pub families: Vec<FamilyRecord>,
    pub trajectories: usize,
    pub worst_monotonicity_violation: f64,
    pub worst_constraint_drift: f64,
    pub invariants_hold: bool,
}

/// Everything a run produced. Serialized deterministically.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub seed: u64,
    pub m_max: usize,
    pub function: String,
    pub attempts: Vec<AttemptRecord>,
    pub settings: SolverSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub critical_points: Vec<CriticalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub morse: Option<MorseSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<JumpEnumeration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivariant: Option<EquivariantSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerifySection>,
}

impl Report {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("reports serialize")
    }
}

/// A flow line as stored for export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedFlowLine {
    pub source: String,
    pub target: String,
    pub start: Vec<f64>,
    pub target_location: Vec<f64>,
    /// The start lies next to the target and the line is traced backward.
    pub backward: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedSegment {
    pub start: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub before_jump: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedJumpLine {
    pub source: String,
    pub target: String,
    pub k: usize,
    pub residual: f64,
    pub sigma_min: f64,
    pub isolation: f64,
    pub segments: Vec<CachedSegment>,
}

/// What `export` needs to regenerate trajectories without re-solving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cache {
    pub config: ScenarioConfig,
    /// Seed of the perturbation applied to the configured function, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation_seed: Option<u64>,
    pub flow_lines: Vec<CachedFlowLine>,
    pub jump_lines: Vec<CachedJumpLine>,
}

impl Cache {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("caches serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Cache(format!("unreadable cache: {}", e.message())))
    }
}

pub struct Run {
    pub report: Report,
    pub cache: Option<Cache>,
}

impl Run {
    pub fn status(&self) -> Status {
        self.report.status
    }
}

/// Everything computed in one attempt.
pub struct Computation {
    pub function: ScalarField,
    pub perturbation_seed: Option<u64>,
    pub crits: Vec<CriticalPoint>,
    pub morse: Option<MorseDifferential>,
    pub jumps: Vec<JumpEnumeration>,
    pub equivariant: Option<EquivariantDifferential>,
}

/// A scenario with its geometric objects built.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub manifold: EmbeddedManifold,
    pub action: CircleAction,
    pub function: ScalarField,
}

impl Scenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let manifold = config.manifold()?;
        let n = manifold.ambient_dim();
        Ok(Self {
            action: config.action(n)?,
            function: config.function(n)?,
            manifold,
            config: config.clone(),
        })
    }
}

/// Random polynomial of degree at most 2 with coefficients in `[-1, 1]`
/// (no constant term).
pub fn random_quadratic(nvars: usize, rng: &mut ChaCha8Rng) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    for i in 0..nvars {
        let mut e = vec![0; nvars];
        e[i] = 1;
        p.add_term(e, rng.random_range(-1.0..=1.0));
    }
    for i in 0..nvars {
        for j in i..nvars {
            let mut e = vec![0; nvars];
            e[i] += 1;
            e[j] += 1;
            p.add_term(e, rng.random_range(-1.0..=1.0));
        }
    }
    p
}

/// The function perturbed with the random quadratic drawn from `seed`.
pub fn perturb(f: &ScalarField, nvars: usize, seed: u64, amplitude: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    f.perturbed(&random_quadratic(nvars, &mut rng), amplitude)
}

fn context<'a>(
    s: &'a Scenario,
    f: &'a ScalarField,
    crits: &'a [CriticalPoint],
    settings: &'a SolverSettings,
) -> ShootingContext<'a> {
    ShootingContext {
        manifold: &s.manifold,
        function: f,
        action: &s.action,
        crits,
        settings,
    }
}

/// Critical points of `f` from a seed cloud of the given resolution.
pub fn critical_points(
    m: &EmbeddedManifold,
    f: &ScalarField,
    cloud: &[DVector<f64>],
    resolution: usize,
) -> Result<Vec<CriticalPoint>> {
    find_critical_points(m, f, cloud, 2.1 * m.extent() / resolution as f64)
}

/// Jump enumerations for every pair with a zero-dimensional moduli space.
pub fn all_jumps(ctx: &ShootingContext<'_>) -> Result<Vec<JumpEnumeration>> {
    let n = ctx.manifold.intrinsic_dim();
    let mut out = Vec::new();
    for k in 1..=n.div_ceil(2) {
        for (x, cx) in ctx.crits.iter().enumerate() {
            for (y, cy) in ctx.crits.iter().enumerate() {
                if cy.index + 2 * k - 1 == cx.index {
                    out.push(enumerate_k_jump_flow_lines(ctx, x, y, k)?);
                }
            }
        }
    }
    Ok(out)
}

pub fn jump_counts(crits: &[CriticalPoint], jumps: &[JumpEnumeration]) -> JumpCounts {
    let pos = |id: &str| crits.iter().position(|c| c.id == id).expect("known id");
    jumps
        .iter()
        .map(|e| ((e.k, pos(&e.source), pos(&e.target)), e.parity()))
        .collect()
}

/// One attempt with a fixed function, up to `step`.
pub fn compute(
    s: &Scenario,
    f: ScalarField,
    cloud: &[DVector<f64>],
    settings: &SolverSettings,
    step: Step,
    resolution: usize,
) -> Result<Computation> {
    let crits = critical_points(&s.manifold, &f, cloud, resolution)?;
    let mut out = Computation {
        function: f.clone(),
        perturbation_seed: None,
        crits,
        morse: None,
        jumps: Vec::new(),
        equivariant: None,
    };
    if step < Step::Morse {
        return Ok(out);
    }
    let ctx = context(s, &f, &out.crits, settings);
    out.morse = Some(morse_differential(&ctx)?);
    if step < Step::Jumps {
        return Ok(out);
    }
    out.jumps = all_jumps(&ctx)?;
    if step < Step::Homology {
        return Ok(out);
    }
    let counts = jump_counts(&out.crits, &out.jumps);
    let e = assemble_d_s1(
        &out.crits,
        s.manifold.intrinsic_dim(),
        out.morse.as_ref().expect("computed"),
        &counts,
    )?;
    let square = verify_d_squared(&e);
    if let Some(first) = square.nonzero.first() {
        return Err(Error::CountInconsistency {
            from: first.source.clone(),
            to: first.target.clone(),
        });
    }
    out.equivariant = Some(e);
    Ok(out)
}

/// Runs a scenario with automatic perturbation on inconclusive attempts.
pub fn run_scenario(config: &ScenarioConfig, opts: &RunOptions) -> Result<Run> {
    let scenario = Scenario::new(config)?;
    let seed = opts.seed.unwrap_or(config.seed);
    let m_max = opts.m_max.unwrap_or(config.m_max);
    let settings = opts.settings.clone().unwrap_or_else(|| config.settings());
    let expected = opts
        .expected
        .clone()
        .or_else(|| config.expected_dims().map(<[usize]>::to_vec));
    let nvars = scenario.manifold.ambient_dim();

    let validation = validate_scenario(&scenario.manifold, &scenario.action, &scenario.function);
    let mut report = Report {
        scenario: config.id.clone(),
        status: Status::Pass,
        message: None,
        seed,
        m_max,
        function: scenario.function.polynomial().to_string(),
        attempts: Vec::new(),
        settings: settings.clone(),
        validation: Some(validation.clone()),
        critical_points: Vec::new(),
        morse: None,
        jumps: Vec::new(),
        equivariant: None,
        verification: None,
    };
    if !validation.passed() {
        report.status = Status::Inconclusive;
        report.message = Some(format!("validation failed: {}", validation.failures().join(", ")));
        return Ok(Run { report, cache: None });
    }
    if opts.step == Step::Validate {
        return Ok(Run { report, cache: None });
    }

    let cloud = seed_cloud(&scenario.manifold, opts.search_resolution);
    let pert = &config.perturbation;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = None;
    let mut last_error = None;
    let mut settings = settings;
    'attempts: for attempt in 0..=pert.retries {
        let pseed = (attempt > 0 || pert.always).then(|| rng.random::<u64>());
        let f = match pseed {
            Some(ps) => perturb(&scenario.function, nvars, ps, pert.amplitude),
            None => scenario.function.clone(),
        };
        let mut scaled = settings.clone();
        for level in 0..=GRID_ESCALATIONS {
            let grid_scale = 1 << level;
            scaled.angle_grid = settings.angle_grid * grid_scale;
            scaled.duration_grid = settings.duration_grid * grid_scale;
            match compute(&scenario, f.clone(), &cloud, &scaled, opts.step, opts.search_resolution) {
                Ok(mut c) => {
                    c.perturbation_seed = pseed;
                    report.attempts.push(AttemptRecord {
                        attempt,
                        perturbation_seed: pseed,
                        grid_scale,
                        outcome: "ok".into(),
                    });
                    settings = scaled;
                    done = Some(c);
                    break 'attempts;
                }
                Err(e) => {
                    report.attempts.push(AttemptRecord {
                        attempt,
                        perturbation_seed: pseed,
                        grid_scale,
                        outcome: e.to_string(),
                    });
                    let retry_finer = matches!(e, Error::CountInconsistency { .. });
                    last_error = Some(e);
                    if !retry_finer {
                        break;
                    }
                }
            }
        }
    }
    let Some(c) = done else {
        report.status = Status::Inconclusive;
        report.message = last_error.map(|e| e.to_string());
        return Ok(Run { report, cache: None });
    };

    report.function = c.function.polynomial().to_string();
    report.settings = settings.clone();
    report.critical_points = c.crits.iter().map(CriticalPoint::summary).collect();
    let n = scenario.manifold.intrinsic_dim();
    if let Some(d) = &c.morse {
        let counts = critical_counts(&c.crits, n);
        let homology = morse_homology(&c.crits, d, n);
        report.morse = Some(MorseSection {
            inequalities: check_morse_inequalities(&counts, &homology),
            critical_counts: counts,
            homology,
            differential: d.clone(),
        });
    }
    report.jumps = c.jumps.clone();
    if let Some(e) = &c.equivariant {
        let table = equivariant_homology(e, m_max, expected.as_deref())?;
        if table.comparison.as_ref().is_some_and(|cmp| !cmp.matches) {
            report.status = Status::Mismatch;
            report.message = Some("equivariant dims differ from the expected table".into());
        }
        if !table.truncation_stable || table.per_k_identities.iter().any(|&(_, ok)| !ok) {
            report.status = Status::Inconclusive;
            report.message = Some("truncation or per-k identity check failed".into());
        }
        report.equivariant = Some(EquivariantSection {
            k_max: e.k_max,
            square: verify_d_squared(e),
            surface_jump_pattern: surface_jump_pattern(e),
            homology: table,
        });
    }

    let cache = build_cache(&scenario, &c, &settings)?;
    if opts.step == Step::Verify {
        let v = verify(&scenario, &c, &cloud, &settings, opts.search_resolution, &cache)?;
        if report.status == Status::Pass && !(v.smooth_agrees && v.parity_flips.is_empty() && v.invariants_hold) {
            report.status = Status::Inconclusive;
            report.message = Some("verification failed".into());
        }
        report.verification = Some(v);
    }
    Ok(Run {
        report,
        cache: Some(cache),
    })
}

/// Stored trajectories for the computed flow lines and jump lines.
pub fn build_cache(s: &Scenario, c: &Computation, settings: &SolverSettings) -> Result<Cache> {
    let mut flow_lines = Vec::new();
    if let Some(d) = &c.morse {
        for pair in &d.pairs {
            for l in &pair.lines {
                flow_lines.push(CachedFlowLine {
                    source: l.source.clone(),
                    target: l.target.clone(),
                    start: l.start.clone(),
                    target_location: c
                        .crits
                        .iter()
                        .find(|p| p.id == l.target)
                        .expect("known")
                        .location
                        .iter()
                        .copied()
                        .collect(),
                    backward: matches!(l.seed, SeedSpec::TargetBranch { .. }),
                });
            }
        }
    }
    let ctx = context(s, &c.function, &c.crits, settings);
    let mut jump_lines = Vec::new();
    for e in &c.jumps {
        for sol in &e.solutions {
            let problem = &e.problems[sol.problem];
            let segs = segments(&ctx, problem, &sol.params)?;
            jump_lines.push(CachedJumpLine {
                source: e.source.clone(),
                target: e.target.clone(),
                k: e.k,
                residual: sol.certificate.residual,
                sigma_min: sol.certificate.sigma_min,
                isolation: sol.certificate.isolation,
                segments: segs
                    .into_iter()
                    .map(|g| CachedSegment {
                        start: g.start.iter().copied().collect(),
                        duration: g.duration,
                        jump: g.jump.as_ref().map(|j| j.0),
                        before_jump: g.jump.map(|j| j.1.iter().copied().collect()),
                    })
                    .collect(),
            });
        }
    }
    Ok(Cache {
        config: s.config.clone(),
        perturbation_seed: c.perturbation_seed,
        flow_lines,
        jump_lines,
    })
}

/// Parities of `d` and of every jump count, keyed by `(k, source, target)`.
fn parities(c: &Computation) -> BTreeMap<(usize, String, String), bool> {
    let mut out = BTreeMap::new();
    if let Some(d) = &c.morse {
        for p in &d.pairs {
            out.insert((0, p.source.clone(), p.target.clone()), p.parity);
        }
    }
    for e in &c.jumps {
        out.insert((e.k, e.source.clone(), e.target.clone()), e.parity());
    }
    out
}

/// Cross-checks: smooth homotopy counts, parity stability under tolerance
/// halving and resolution doubling, broken-limit diagnostics of
/// one-dimensional families, and trajectory invariants.
pub fn verify(
    s: &Scenario,
    c: &Computation,
    cloud: &[DVector<f64>],
    settings: &SolverSettings,
    resolution: usize,
    cache: &Cache,
) -> Result<VerifySection> {
    let ctx = context(s, &c.function, &c.crits, settings);
    let mut smooth = Vec::new();
    let mut smooth_agrees = true;
    for e in c.jumps.iter().filter(|e| e.k == 1) {
        let x = c.crits.iter().position(|p| p.id == e.source).expect("known");
        let y = c.crits.iter().position(|p| p.id == e.target).expect("known");
        let sc = smooth_continuation_crosscheck(&ctx, x, y)?;
        smooth_agrees &= sc.parity == e.parity();
        smooth.push(sc);
    }

    let base = parities(c);
    let mut halved = settings.clone();
    halved.rtol *= 0.5;
    halved.scan_rtol *= 0.5;
    let mut doubled = settings.clone();
    doubled.angle_grid *= 2;
    doubled.duration_grid *= 2;
    let variants = [("tolerance-halved", halved), ("resolution-doubled", doubled)];
    let mut parity_flips = Vec::new();
    for (name, v) in &variants {
        let other = compute(s, c.function.clone(), cloud, v, Step::Jumps, resolution)?;
        let theirs = parities(&other);
        for (key, parity) in &base {
            if theirs.get(key) != Some(parity) {
                parity_flips.push(ParityFlip {
                    variant: name.to_string(),
                    source: key.1.clone(),
                    target: key.2.clone(),
                    k: key.0,
                });
            }
        }
    }

    let mut families = Vec::new();
    for (x, cx) in c.crits.iter().enumerate() {
        for (y, cy) in c.crits.iter().enumerate() {
            if x == y || cx.index != cy.index || ctx.action.is_trivial() {
                continue;
            }
            for problem in jump_problems(&ctx, x, y, 1) {
                let record = match find_family_point(&ctx, &problem) {
                    None => continue,
                    Some(start) => match broken_limit_diagnostics(&ctx, &problem, 1, &start) {
                        Ok(d) => FamilyRecord {
                            source: cx.id.clone(),
                            target: cy.id.clone(),
                            diagnostics: Some(d),
                            unresolved: None,
                        },
                        Err(e) => FamilyRecord {
                            source: cx.id.clone(),
                            target: cy.id.clone(),
                            diagnostics: None,
                            unresolved: Some(e.to_string()),
                        },
                    },
                };
                families.push(record);
            }
        }
    }

    let mut worst_mono: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut trajectories = 0;
    let recorded = IntegratorOptions {
        record: true,
        ..settings.integrator()
    };
    for l in &cache.flow_lines {
        let t = flow_line_trajectory(&s.manifold, &c.function, l, &recorded)?;
        worst_mono = worst_mono.max(t.monotonicity_violation(&c.function));
        worst_drift = worst_drift.max(t.constraint_drift(&s.manifold));
        trajectories += 1;
    }
    for l in &cache.jump_lines {
        for t in jump_line_trajectory(&s.manifold, &c.function, l, &recorded)? {
            worst_mono = worst_mono.max(t.monotonicity_violation(&c.function));
            worst_drift = worst_drift.max(t.constraint_drift(&s.manifold));
        }
        trajectories += 1;
    }
    Ok(VerifySection {
        smooth,
        smooth_agrees,
        variants: variants.iter().map(|(n, _)| n.to_string()).collect(),
        parity_flips,
        families,
        trajectories,
        worst_monotonicity_violation: worst_mono,
        worst_constraint_drift: worst_drift,
        invariants_hold: worst_mono < MONOTONICITY_TOL && worst_drift < DRIFT_TOL,
    })
}
