use std::f64::consts::TAU;

use nalgebra::DVector;
use serde::Serialize;

use super::shooting::{
    grid_minima, landing_levels, normalize_params, param_distance, polish_all, scan, ParamKind, Polished,
    ShootingContext, ShootingProblem, Stage,
};
use crate::error::{Error, Result};

/// Dimension `μ(y) - μ(x) + 2k - 1` of the space of unparametrized k-jump lines.
pub fn moduli_dimension(index_x: usize, index_y: usize, k: usize) -> i64 {
    index_y as i64 - index_x as i64 + 2 * k as i64 - 1
}

/// How the first segment leaves the source.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeedSpec {
    /// The source has no unstable directions: the first segment is constant.
    Constant,
    /// One unstable direction, on the given side.
    Branch { sign: f64 },
    /// Angles on the unstable sphere.
    Sphere { angles: Vec<f64> },
    /// One stable direction of the target, followed backward in time.
    TargetBranch { sign: f64 },
}

/// Parameters of a k-jump flow line: the seed and flow time along the first
/// segment, the jump angles, and the interior durations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpConfiguration {
    pub source: String,
    pub target: String,
    pub k: usize,
    pub seed: SeedSpec,
    pub first_duration: Option<f64>,
    pub jumps: Vec<f64>,
    pub durations: Vec<f64>,
}

/// Numerical evidence that a root is a regular isolated solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionCertificate {
    pub residual: f64,
    pub sigma_min: f64,
    /// Parameter distance to the nearest other root (infinite if alone).
    pub isolation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpSolution {
    pub config: JumpConfiguration,
    pub certificate: SolutionCertificate,
    #[serde(skip)]
    pub params: Vec<f64>,
    #[serde(skip)]
    pub problem: usize,
}

/// Outcome of enumerating the k-jump lines between two critical points.
#[derive(Clone, Debug, Serialize)]
pub struct JumpEnumeration {
    pub source: String,
    pub target: String,
    pub k: usize,
    pub solutions: Vec<JumpSolution>,
    /// The residual does not depend on the jump angles at all.
    pub exact_family: bool,
    /// Converged roots of the angle-independent system (for exact families).
    pub family_roots: usize,
    #[serde(skip)]
    pub problems: Vec<ShootingProblem>,
}

impl JumpEnumeration {
    /// Parity of certified isolated roots; exact families contribute zero.
    pub fn parity(&self) -> bool {
        !self.exact_family && self.solutions.len() % 2 == 1
    }
}

/// The shooting problems whose roots are the k-jump lines from `x` to `y`
/// (one per branch when the source has a single unstable direction).
pub fn jump_problems(ctx: &ShootingContext<'_>, x: usize, y: usize, k: usize) -> Vec<ShootingProblem> {
    let m_x = ctx.crits[x].frames.unstable_dim();
    let min_first = ctx.settings.min_first_duration;
    let mut tail = Vec::new();
    for j in 0..k {
        if j > 0 {
            tail.push(Stage::Flow { min: 0.0 });
        }
        tail.push(Stage::Jump);
    }
    let with_head = |head: Vec<Stage>| {
        let mut stages = head;
        stages.extend(tail.iter().cloned());
        ShootingProblem {
            source: x,
            target: y,
            stages,
        }
    };
    match m_x {
        0 => vec![with_head(vec![Stage::Constant])],
        1 => [1.0, -1.0]
            .iter()
            .map(|&s| with_head(vec![Stage::Branch(s), Stage::Flow { min: min_first }]))
            .collect(),
        m => vec![with_head(vec![Stage::Sphere(m), Stage::Flow { min: min_first }])],
    }
}

/// Grid-seeded Gauss-Newton over all problems, deduplication and certificates.
///
/// Returns [`Error::NonTransversal`] if a converged root is rank deficient
/// and the residual is not exactly independent of the jump angles.
pub fn solve_problems(ctx: &ShootingContext<'_>, problems: &[ShootingProblem], k: usize) -> Result<JumpEnumeration> {
    let x = problems[0].source;
    let y = problems[0].target;
    let settings = ctx.settings;
    let mut exact_family = k > 0 && ctx.action.is_trivial();
    let mut candidates: Vec<(usize, Polished)> = Vec::new();

    for (pi, problem) in problems.iter().enumerate() {
        let levels = landing_levels(ctx, problem);
        let (axes, samples) = scan(ctx, problem, levels[0]);
        let minima = grid_minima(&axes, &samples);
        if k > 0 && !exact_family && angle_invariant(ctx, problem, &samples, &minima, levels[0]) {
            exact_family = true;
        }
        let cap = if exact_family { 16 } else { settings.max_starts };
        let starts: Vec<Vec<f64>> = minima.iter().take(cap).map(|&i| samples[i].params.clone()).collect();
        candidates.extend(polish_all(ctx, problem, &starts).into_iter().map(|p| (pi, p)));
    }

    let mut roots: Vec<(usize, Polished)> = Vec::new();
    for (pi, mut p) in candidates {
        if p.residual_norm() >= settings.residual_tol {
            continue;
        }
        let kinds = problems[pi].param_kinds();
        if !in_domain(&kinds, &p.params, settings.max_duration) {
            continue;
        }
        normalize_params(&kinds, &mut p.params);
        let dup = roots
            .iter()
            .any(|(qi, q)| *qi == pi && param_distance(&kinds, &q.params, &p.params) < settings.dedup_radius);
        if !dup {
            roots.push((pi, p));
        }
    }

    let source = ctx.crits[x].id.clone();
    let target = ctx.crits[y].id.clone();
    if exact_family {
        return Ok(JumpEnumeration {
            source,
            target,
            k,
            solutions: Vec::new(),
            exact_family: true,
            family_roots: roots.len(),
            problems: problems.to_vec(),
        });
    }

    roots.sort_by(|(a, p), (b, q)| {
        a.cmp(b).then_with(|| {
            p.params
                .iter()
                .zip(&q.params)
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut solutions = Vec::with_capacity(roots.len());
    for (i, (pi, p)) in roots.iter().enumerate() {
        let kinds = problems[*pi].param_kinds();
        let isolation = roots
            .iter()
            .enumerate()
            .filter(|(j, (qi, _))| *j != i && qi == pi)
            .map(|(_, (_, q))| param_distance(&kinds, &p.params, &q.params))
            .fold(f64::INFINITY, f64::min);
        let svs = p.singular_values();
        let sigma_min = svs.first().copied().unwrap_or(0.0);
        let n_params = p.params.len();
        let r_dim = p.residual.len();
        let square = n_params == r_dim;
        let certificate = SolutionCertificate {
            residual: p.residual_norm(),
            sigma_min,
            isolation,
            passed: square
                && p.residual_norm() < settings.residual_tol
                && sigma_min > settings.sigma_tol
                && isolation > settings.isolation_tol,
        };
        if !certificate.passed {
            let deficient = svs.iter().filter(|&&s| s <= settings.sigma_tol).count();
            return Err(Error::NonTransversal {
                from: source,
                to: target,
                k,
                family_dim: deficient + n_params.saturating_sub(r_dim),
            });
        }
        solutions.push(JumpSolution {
            config: decode(ctx, &problems[*pi], k, &p.params),
            certificate,
            params: p.params.clone(),
            problem: *pi,
        });
    }
    Ok(JumpEnumeration {
        source,
        target,
        k,
        solutions,
        exact_family: false,
        family_roots: 0,
        problems: problems.to_vec(),
    })
}

fn in_domain(kinds: &[ParamKind], params: &[f64], max_duration: f64) -> bool {
    kinds.iter().zip(params).all(|(k, &v)| match k {
        ParamKind::Duration { min } => v >= min - 1e-9 && v < max_duration,
        ParamKind::Polar => (-1e-9..=std::f64::consts::PI + 1e-9).contains(&v),
        ParamKind::Angle => v.is_finite(),
    })
}

/// True when shifting every jump angle leaves the residual unchanged to 1e-12.
fn angle_invariant(
    ctx: &ShootingContext<'_>,
    problem: &ShootingProblem,
    samples: &[super::shooting::GridSample],
    minima: &[usize],
    delta: f64,
) -> bool {
    let jumps = problem.jump_params();
    if jumps.is_empty() {
        return false;
    }
    let opts = ctx.settings.scan_integrator();
    let probes: Vec<&Vec<f64>> = minima.iter().take(4).map(|&i| &samples[i].params).collect();
    if probes.is_empty() {
        return false;
    }
    for params in probes {
        let Some(base) = problem.evaluate(ctx, params, delta, &opts) else {
            return false;
        };
        for shift in [1.234, 2.5] {
            let mut q = params.clone();
            for &j in &jumps {
                q[j] = (q[j] + shift).rem_euclid(TAU);
            }
            match problem.evaluate(ctx, &q, delta, &opts) {
                Some(l) if (&l.residual - &base.residual).norm() < 1e-12 => {}
                _ => return false,
            }
        }
    }
    true
}

/// One flow segment of a piecewise trajectory, entered by a jump unless it
/// is the first.
#[derive(Clone, Debug)]
pub struct Segment {
    pub start: DVector<f64>,
    /// Flow time along the segment; `None` for the final approach to the target.
    pub duration: Option<f64>,
    /// Jump angle and the point before the jump.
    pub jump: Option<(f64, DVector<f64>)>,
}

/// The segments of the trajectory with parameters `params`.
pub fn segments(ctx: &ShootingContext<'_>, problem: &ShootingProblem, params: &[f64]) -> Result<Vec<Segment>> {
    let opts = ctx.settings.integrator();
    let points = problem.waypoints(ctx, params, &opts)?;
    let first = match &problem.stages[0] {
        Stage::Sphere(m) => m - 1,
        _ => 0,
    };
    let mut out = vec![Segment {
        start: points[0].clone(),
        duration: Some(0.0),
        jump: None,
    }];
    for (si, stage) in problem.stages.iter().enumerate().skip(1) {
        let v = params[first + si - 1];
        match stage {
            Stage::Flow { .. } => {
                let seg = out.last_mut().expect("nonempty");
                seg.duration = Some(v);
                if v < 0.0 {
                    seg.start = points[si].clone();
                    seg.duration = Some(0.0);
                }
            }
            Stage::Jump | Stage::SmoothJump { .. } => out.push(Segment {
                start: points[si].clone(),
                duration: None,
                jump: Some((v, points[si - 1].clone())),
            }),
            _ => {}
        }
    }
    let last = out.last_mut().expect("nonempty");
    last.duration = None;
    Ok(out)
}

/// Splits a parameter vector into the named configuration fields.
pub fn decode(ctx: &ShootingContext<'_>, problem: &ShootingProblem, k: usize, params: &[f64]) -> JumpConfiguration {
    let mut i = 0;
    let seed = match &problem.stages[0] {
        Stage::Constant => SeedSpec::Constant,
        Stage::Branch(s) => SeedSpec::Branch { sign: *s },
        Stage::Sphere(m) => {
            i = m - 1;
            SeedSpec::Sphere {
                angles: params[..m - 1].to_vec(),
            }
        }
        _ => unreachable!("problems start with a seed stage"),
    };
    let mut first_duration = None;
    let mut jumps = Vec::new();
    let mut durations = Vec::new();
    for stage in &problem.stages[1..] {
        match stage {
            Stage::Flow { .. } if jumps.is_empty() => first_duration = Some(params[i]),
            Stage::Flow { .. } => durations.push(params[i]),
            Stage::Jump | Stage::SmoothJump { .. } => jumps.push(params[i]),
            _ => {}
        }
        i += 1;
    }
    JumpConfiguration {
        source: ctx.crits[problem.source].id.clone(),
        target: ctx.crits[problem.target].id.clone(),
        k,
        seed,
        first_duration,
        jumps,
        durations,
    }
}

fn check_pair(ctx: &ShootingContext<'_>, x: usize, y: usize, k: usize) -> Result<()> {
    let n = ctx.manifold.intrinsic_dim();
    let (cx, cy) = (&ctx.crits[x], &ctx.crits[y]);
    if k == 0 || 2 * k - 1 > n {
        return Err(Error::Precondition(format!(
            "k = {k} outside 1..={} for a {n}-manifold",
            n.div_ceil(2)
        )));
    }
    if moduli_dimension(cx.index, cy.index, k) != 0 {
        return Err(Error::Precondition(format!(
            "moduli space {} -> {} with k = {k} has dimension {}, not 0",
            cx.id,
            cy.id,
            moduli_dimension(cx.index, cy.index, k)
        )));
    }
    Ok(())
}

/// All k-jump flow lines from `x` to `y` in a zero-dimensional moduli space.
pub fn enumerate_k_jump_flow_lines(ctx: &ShootingContext<'_>, x: usize, y: usize, k: usize) -> Result<JumpEnumeration> {
    check_pair(ctx, x, y, k)?;
    let problems = jump_problems(ctx, x, y, k);
    solve_problems(ctx, &problems, k)
}

/// `n_k(x, y)`: parity of the certified k-jump lines.
pub fn count_k_jump_mod2(ctx: &ShootingContext<'_>, x: usize, y: usize, k: usize) -> Result<bool> {
    Ok(enumerate_k_jump_flow_lines(ctx, x, y, k)?.parity())
}
