use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::shooting::{
    gauss_newton, grid_minima, jacobian, param_distance, scan, ParamKind, ShootingContext, ShootingProblem, Stage,
};
use crate::error::{Error, Result};
use crate::flow::{flow_for, flow_segment, IntegratorOptions};

const MAX_STEPS: usize = 60;
const MIN_STEP: f64 = 1e-4;
const MAX_STEP: f64 = 0.5;
const LINGER_RADIUS: f64 = 0.05;
const SOURCE_FACE_RADIUS: f64 = 1e-5;
const BREAK_RADIUS: f64 = 1e-4;
const LANDING_BREAK_RADIUS: f64 = 1e-3;
const CORRECT_ITERS: usize = 40;
const CORRECT_TOL: f64 = 1e-9;

/// How one end of a one-parameter family terminates.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "end", rename_all = "kebab-case")]
pub enum FamilyEnd {
    /// Breaking into `m` pieces with jump orders `gamma` through `via`.
    Broken {
        m: usize,
        gamma: Vec<usize>,
        via: String,
        parameter: String,
    },
    /// An interior duration reached zero: two jumps merge into one.
    MergedJumps { duration: usize },
    /// The first segment shrank back into the source.
    SourceFace,
    /// The family closed up into a loop.
    Closed,
    /// Continuation stopped before the end could be classified.
    Unresolved { reason: String },
}

impl FamilyEnd {
    /// `Σ Γ_j` for broken ends.
    pub fn total_jumps(&self) -> Option<usize> {
        match self {
            FamilyEnd::Broken { gamma, .. } => Some(gamma.iter().sum()),
            _ => None,
        }
    }
}

/// Both ends of a family traced from a starting point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyDiagnostics {
    pub k: usize,
    pub start: Vec<f64>,
    pub ends: Vec<FamilyEnd>,
}

fn landing_delta(ctx: &ShootingContext<'_>, problem: &ShootingProblem) -> f64 {
    if ctx.crits[problem.target].index == 0 {
        0.0
    } else {
        1e-6
    }
}

/// A point on a one-dimensional solution family, from the best grid minima.
pub fn find_family_point(ctx: &ShootingContext<'_>, problem: &ShootingProblem) -> Option<Vec<f64>> {
    let opts = ctx.settings.integrator();
    let coarse = if ctx.crits[problem.target].index == 0 {
        0.0
    } else {
        1e-2
    };
    let (axes, samples) = scan(ctx, problem, coarse);
    let delta = landing_delta(ctx, problem);
    for i in grid_minima(&axes, &samples).into_iter().take(64) {
        let mut p = samples[i].params.clone();
        if coarse != delta {
            let Some(q) = gauss_newton(ctx, problem, &p, coarse, 30, &opts) else {
                continue;
            };
            p = q;
        }
        let Some(p) = gauss_newton(ctx, problem, &p, delta, 50, &opts) else {
            continue;
        };
        let Some(l) = problem.evaluate(ctx, &p, delta, &opts) else {
            continue;
        };
        if l.residual.norm() < 1e-9 && interior(ctx, problem, &p) {
            return Some(p);
        }
    }
    None
}

fn interior(ctx: &ShootingContext<'_>, problem: &ShootingProblem, p: &[f64]) -> bool {
    problem.param_kinds().iter().zip(p).all(|(k, &v)| match k {
        ParamKind::Duration { min } => v > *min && v < ctx.settings.max_duration,
        _ => true,
    })
}

/// Unit null vector of a `(p-1) x p` Jacobian.
fn null_vector(j: &DMatrix<f64>) -> DVector<f64> {
    let p = j.ncols();
    let mut sq = DMatrix::zeros(p, p);
    sq.view_mut((0, 0), (j.nrows(), p)).copy_from(j);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    vt.row(imin).transpose()
}

/// Pseudo-arclength continuation of the family through `start` in both
/// directions, classifying each end. Broken ends must satisfy `Σ Γ_j = k`.
pub fn broken_limit_diagnostics(
    ctx: &ShootingContext<'_>,
    problem: &ShootingProblem,
    k: usize,
    start: &[f64],
) -> Result<FamilyDiagnostics> {
    let kinds = problem.param_kinds();
    if problem.residual_dim(ctx) + 1 != kinds.len() {
        return Err(Error::Precondition(format!(
            "family continuation needs one more parameter than residual components ({} vs {})",
            kinds.len(),
            problem.residual_dim(ctx)
        )));
    }
    let mut ends = Vec::new();
    for direction in [1.0, -1.0] {
        let end = match trace(ctx, problem, k, start, direction) {
            Ok(end) => end,
            Err(Error::LimitUnresolved(reason)) => FamilyEnd::Unresolved { reason },
            Err(e) => return Err(e),
        };
        if let Some(total) = end.total_jumps() {
            if total != k {
                return Err(Error::LimitUnresolved(format!(
                    "broken limit with Σ Γ = {total} in a {k}-jump family"
                )));
            }
        }
        ends.push(end);
    }
    Ok(FamilyDiagnostics {
        k,
        start: start.to_vec(),
        ends,
    })
}

fn trace(
    ctx: &ShootingContext<'_>,
    problem: &ShootingProblem,
    k: usize,
    start: &[f64],
    direction: f64,
) -> Result<FamilyEnd> {
    let opts = ctx.settings.integrator();
    let delta = landing_delta(ctx, problem);
    let kinds = problem.param_kinds();
    let unresolved = |why: &str| Error::LimitUnresolved(why.to_string());
    let mut p = DVector::from_column_slice(start);
    let j0 = jacobian(ctx, problem, start, delta, &opts).ok_or_else(|| unresolved("no Jacobian"))?;
    let mut tangent = null_vector(&j0) * direction;
    let mut h = 0.1;
    let mut travelled = 0.0;
    for _ in 0..MAX_STEPS {
        let pred = &p + &tangent * h;
        match correct(ctx, problem, pred.as_slice(), delta) {
            Some((q, landing_time)) => {
                let q = DVector::from_vec(q);
                if let Some(end) = classify_end(ctx, problem, k, q.as_slice(), landing_time)? {
                    return Ok(end);
                }
                let jq = jacobian(ctx, problem, q.as_slice(), delta, &opts).ok_or_else(|| unresolved("no Jacobian"))?;
                let mut t = null_vector(&jq);
                if t.dot(&tangent) < 0.0 {
                    t = -t;
                }
                travelled += (&q - &p).norm();
                tangent = t;
                p = q;
                h = (h * 1.5).min(MAX_STEP);
                if travelled > 2.0 && param_distance(&kinds, p.as_slice(), start) < 0.5 * h {
                    return Ok(FamilyEnd::Closed);
                }
            }
            None => {
                h *= 0.5;
                if h < MIN_STEP {
                    return Err(unresolved("continuation step underflow"));
                }
            }
        }
    }
    Err(unresolved("horizon exhausted"))
}

/// Minimal-norm chord iteration back onto the family; the Jacobian is
/// refreshed every few iterations.
fn correct(ctx: &ShootingContext<'_>, problem: &ShootingProblem, start: &[f64], delta: f64) -> Option<(Vec<f64>, f64)> {
    let opts = ctx.settings.integrator();
    let mut params = start.to_vec();
    let mut svd = None;
    for it in 0..CORRECT_ITERS {
        let l = problem.evaluate(ctx, &params, delta, &opts)?;
        if l.residual.norm() < CORRECT_TOL {
            return Some((params, l.time));
        }
        if it % 5 == 0 {
            svd = Some(jacobian(ctx, problem, &params, delta, &opts)?.svd(true, true));
        }
        let step = svd.as_ref()?.solve(&l.residual, 1e-12).ok()?;
        if step.norm() > 0.5 {
            return None;
        }
        for (x, s) in params.iter_mut().zip(step.iter()) {
            *x -= s;
        }
    }
    None
}

fn classify_end(
    ctx: &ShootingContext<'_>,
    problem: &ShootingProblem,
    k: usize,
    params: &[f64],
    landing_time: f64,
) -> Result<Option<FamilyEnd>> {
    let max = ctx.settings.max_duration;
    let opts = ctx.settings.integrator();
    let waypoints = problem
        .waypoints(ctx, params, &opts)
        .map_err(|e| Error::LimitUnresolved(e.to_string()))?;
    let mut i = match &problem.stages[0] {
        Stage::Sphere(m) => m - 1,
        _ => 0,
    };
    let mut jumps_before = 0;
    for (si, stage) in problem.stages.iter().enumerate().skip(1) {
        if let Stage::Flow { min } = stage {
            let v = params[i];
            let first = jumps_before == 0;
            let passes = ctx
                .crits
                .iter()
                .enumerate()
                .find(|(z, c)| *z != problem.source && (&waypoints[si] - &c.location).norm() < BREAK_RADIUS);
            if let Some((_, c)) = passes.filter(|_| v > 0.0) {
                return Ok(Some(FamilyEnd::Broken {
                    m: 2,
                    gamma: vec![jumps_before, k - jumps_before],
                    via: c.id.clone(),
                    parameter: duration_name(first, jumps_before),
                }));
            }
            if v >= max {
                let via = lingering(ctx, &waypoints[si - 1], v)?;
                return Ok(Some(FamilyEnd::Broken {
                    m: 2,
                    gamma: vec![jumps_before, k - jumps_before],
                    via,
                    parameter: duration_name(first, jumps_before),
                }));
            }
            let near_source =
                first && (&waypoints[si] - &ctx.crits[problem.source].location).norm() < SOURCE_FACE_RADIUS;
            if v <= *min || near_source {
                return Ok(Some(if first {
                    FamilyEnd::SourceFace
                } else {
                    FamilyEnd::MergedJumps { duration: jumps_before }
                }));
            }
        }
        if matches!(stage, Stage::Jump | Stage::SmoothJump { .. }) {
            jumps_before += 1;
        }
        i += 1;
    }
    let last = waypoints.last().expect("nonempty");
    if landing_time > 0.0 {
        let seg = flow_segment(
            ctx.manifold,
            ctx.function,
            last,
            landing_time,
            &IntegratorOptions { record: true, ..opts },
        )
        .map_err(|e| Error::LimitUnresolved(e.to_string()))?;
        let mut closest = (f64::INFINITY, problem.target);
        for (_, p) in &seg.samples {
            for (z, c) in ctx.crits.iter().enumerate() {
                let d = (p - &c.location).norm();
                if z != problem.target && d < closest.0 {
                    closest = (d, z);
                }
            }
        }
        if closest.0 < LANDING_BREAK_RADIUS {
            return Ok(Some(FamilyEnd::Broken {
                m: 2,
                gamma: vec![k, 0],
                via: ctx.crits[closest.1].id.clone(),
                parameter: "landing-time".into(),
            }));
        }
    }
    if landing_time >= max {
        let via = lingering(ctx, last, landing_time)?;
        return Ok(Some(FamilyEnd::Broken {
            m: 2,
            gamma: vec![k, 0],
            via,
            parameter: "landing-time".into(),
        }));
    }
    Ok(None)
}

fn duration_name(first: bool, jumps_before: usize) -> String {
    if first {
        "first-duration".into()
    } else {
        format!("duration-{jumps_before}")
    }
}

/// The critical point a long segment from `p` of length `t` passes through,
/// read off at the segment's midpoint.
fn lingering(ctx: &ShootingContext<'_>, p: &DVector<f64>, t: f64) -> Result<String> {
    let opts = ctx.settings.integrator();
    let mid = flow_for(ctx.manifold, ctx.function, p, 0.5 * t, &opts)?;
    let (d, c) = ctx
        .crits
        .iter()
        .map(|c| ((&c.location - &mid).norm(), c))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::LimitUnresolved("no critical points".into()))?;
    if d > LINGER_RADIUS {
        return Err(Error::LimitUnresolved(format!(
            "long segment does not linger near a critical point (closest {} at {d:.3e})",
            c.id
        )));
    }
    Ok(c.id.clone())
}
