//! Multi-segment shooting: piecewise trajectories built from flow segments
//! and orbit jumps, landing residuals at a target critical point, tensor-grid
//! scans and Gauss-Newton polishing.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::flow::{
    flow_at_times, flow_for, integrate_field, sphere_direction, unstable_seed, EndReason, Events, GradientField,
    IntegratorOptions, UNSTABLE_SPHERE_RADIUS,
};
use crate::geometry::{CircleAction, EmbeddedManifold, ScalarField};
use crate::morse::CriticalPoint;

/// Numerical settings shared by all shooting problems.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Relative tolerance for polishing and certificates.
    pub rtol: f64,
    /// Relative tolerance for grid scans.
    pub scan_rtol: f64,
    pub angle_grid: usize,
    pub duration_grid: usize,
    pub max_duration: f64,
    pub min_first_duration: f64,
    pub newton_iters: usize,
    pub fd_step: f64,
    pub dedup_radius: f64,
    pub residual_tol: f64,
    pub sigma_tol: f64,
    pub isolation_tol: f64,
    /// Landing offsets below the target value, coarse to fine.
    pub landing_levels: Vec<f64>,
    pub max_starts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            scan_rtol: 1e-8,
            angle_grid: 64,
            duration_grid: 48,
            max_duration: 50.0,
            min_first_duration: -30.0,
            newton_iters: 100,
            fd_step: 1e-6,
            dedup_radius: 1e-3,
            residual_tol: 1e-8,
            sigma_tol: 1e-4,
            isolation_tol: 1e-3,
            landing_levels: vec![1e-2, 1e-4, 1e-6, 1e-8, 1e-10],
            max_starts: 256,
        }
    }
}

impl SolverSettings {
    pub fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions::default().with_rtol(self.rtol).unrecorded()
    }

    pub fn scan_integrator(&self) -> IntegratorOptions {
        IntegratorOptions::default().with_rtol(self.scan_rtol).unrecorded()
    }

    /// `0` followed by a log-spaced grid up to the maximal duration.
    pub fn duration_values(&self) -> Vec<f64> {
        let n = self.duration_grid.max(2);
        let lo: f64 = 0.02;
        let ratio = (self.max_duration / lo).powf(1.0 / (n - 2) as f64);
        std::iter::once(0.0)
            .chain((0..n - 1).map(|i| lo * ratio.powi(i as i32)))
            .collect()
    }

    pub fn angle_values(&self, count: usize, span: f64) -> Vec<f64> {
        (0..count).map(|i| span * i as f64 / count as f64).collect()
    }
}

/// Everything a shooting problem needs to evaluate trajectories.
#[derive(Clone, Copy)]
pub struct ShootingContext<'a> {
    pub manifold: &'a EmbeddedManifold,
    pub function: &'a ScalarField,
    pub action: &'a CircleAction,
    pub crits: &'a [CriticalPoint],
    pub settings: &'a SolverSettings,
}

impl ShootingContext<'_> {
    /// Smallest distance between two distinct critical points.
    pub fn separation(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (i, a) in self.crits.iter().enumerate() {
            for b in &self.crits[i + 1..] {
                d = d.min((&a.location - &b.location).norm());
            }
        }
        d
    }

    pub fn validity_radius(&self) -> f64 {
        0.5 * self.separation().min(1.0)
    }
}

/// One piece of a piecewise trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    /// Start at the source critical point itself.
    Constant,
    /// Start on the one-dimensional unstable frame, on the given side.
    Branch(f64),
    /// Start on the unstable sphere of the given dimension (`dim - 1` angles).
    Sphere(usize),
    /// Gradient flow for a duration parameter.
    Flow { min: f64 },
    /// Orbit jump `p -> σ_s(p)` by an angle parameter.
    Jump,
    /// Smooth homotopy over `[-ρ, ρ]` with an angle parameter, then `σ_s`.
    SmoothJump { rho: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamKind {
    /// Full circle `[0, 2π)`.
    Angle,
    /// Polar angle in `[0, π]`.
    Polar,
    Duration {
        min: f64,
    },
}

/// Residual at the target and where the trajectory landed.
#[derive(Clone, Debug)]
pub struct Landing {
    pub residual: DVector<f64>,
    pub point: DVector<f64>,
    /// Flow time from the last jump to the landing level.
    pub time: f64,
}

/// A piecewise trajectory from `source` that must land on the stable
/// manifold of `target`.
#[derive(Clone, Debug)]
pub struct ShootingProblem {
    pub source: usize,
    pub target: usize,
    pub stages: Vec<Stage>,
}

impl ShootingProblem {
    pub fn param_kinds(&self) -> Vec<ParamKind> {
        let mut out = Vec::new();
        for s in &self.stages {
            match s {
                Stage::Constant | Stage::Branch(_) => {}
                Stage::Sphere(m) => {
                    for i in 0..m - 1 {
                        out.push(if i + 2 == *m {
                            ParamKind::Angle
                        } else {
                            ParamKind::Polar
                        });
                    }
                }
                Stage::Flow { min } => out.push(ParamKind::Duration { min: *min }),
                Stage::Jump | Stage::SmoothJump { .. } => out.push(ParamKind::Angle),
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_kinds().len()
    }

    /// Positions of the jump-angle parameters.
    pub fn jump_params(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut i = 0;
        for s in &self.stages {
            match s {
                Stage::Constant | Stage::Branch(_) => {}
                Stage::Sphere(m) => i += m - 1,
                Stage::Flow { .. } => i += 1,
                Stage::Jump | Stage::SmoothJump { .. } => {
                    out.push(i);
                    i += 1;
                }
            }
        }
        out
    }

    pub fn residual_dim(&self, ctx: &ShootingContext<'_>) -> usize {
        ctx.crits[self.target].frames.unstable_dim()
    }

    fn start_point(&self, ctx: &ShootingContext<'_>, angles: &[f64]) -> Result<DVector<f64>> {
        let x = &ctx.crits[self.source];
        match &self.stages[0] {
            Stage::Constant => Ok(x.location.clone()),
            Stage::Branch(sign) => unstable_seed(
                ctx.manifold,
                &x.location,
                &x.frames,
                &DVector::from_element(1, *sign),
                UNSTABLE_SPHERE_RADIUS,
            ),
            Stage::Sphere(m) => unstable_seed(
                ctx.manifold,
                &x.location,
                &x.frames,
                &sphere_direction(*m, angles),
                UNSTABLE_SPHERE_RADIUS,
            ),
            other => panic!("stage {other:?} cannot start a trajectory"),
        }
    }

    /// All intermediate points: the start, then the state after every later stage.
    pub fn waypoints(
        &self,
        ctx: &ShootingContext<'_>,
        params: &[f64],
        opts: &IntegratorOptions,
    ) -> Result<Vec<DVector<f64>>> {
        let first = match &self.stages[0] {
            Stage::Sphere(m) => m - 1,
            _ => 0,
        };
        let mut p = self.start_point(ctx, &params[..first])?;
        let mut out = vec![p.clone()];
        let mut i = first;
        for stage in &self.stages[1..] {
            p = apply_stage(ctx, stage, &p, params[i], opts)?;
            i += 1;
            out.push(p.clone());
        }
        Ok(out)
    }

    /// Shooting residual with landing offset `delta`; `None` if the
    /// trajectory does not land near the target.
    pub fn evaluate(
        &self,
        ctx: &ShootingContext<'_>,
        params: &[f64],
        delta: f64,
        opts: &IntegratorOptions,
    ) -> Option<Landing> {
        let pts = self.waypoints(ctx, params, opts).ok()?;
        land(ctx, self.target, pts.last()?, delta, opts)
    }
}

pub(crate) fn apply_stage(
    ctx: &ShootingContext<'_>,
    stage: &Stage,
    p: &DVector<f64>,
    param: f64,
    opts: &IntegratorOptions,
) -> Result<DVector<f64>> {
    match stage {
        Stage::Flow { .. } => flow_for(ctx.manifold, ctx.function, p, param, opts),
        Stage::Jump => ctx.action.act(ctx.manifold, param, p),
        Stage::SmoothJump { rho } => {
            let u = smooth_segment(ctx, p, param, *rho, opts)?;
            ctx.action.act(ctx.manifold, param, &u)
        }
        other => panic!("stage {other:?} is not a continuation stage"),
    }
}

/// Smooth step equal to 1 for `t <= -ρ` and 0 for `t >= ρ`.
pub fn cutoff(t: f64, rho: f64) -> f64 {
    let g = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
    let u = (rho - t) / (2.0 * rho);
    let a = g(u);
    let b = g(1.0 - u);
    a / (a + b)
}

/// Solves `u' = ∇_p F_ρ(u, s, t)` on `[-ρ, ρ]` with
/// `F_ρ = φ_ρ(t) f(p) + (1 - φ_ρ(t)) f(σ_s p)`.
pub fn smooth_segment(
    ctx: &ShootingContext<'_>,
    p: &DVector<f64>,
    s: f64,
    rho: f64,
    opts: &IntegratorOptions,
) -> Result<DVector<f64>> {
    let o = ctx.action.matrix(s);
    let ot = o.transpose();
    let m = ctx.manifold;
    let f = ctx.function;
    let field = |t: f64, q: &DVector<f64>| -> DVector<f64> {
        let phi = cutoff(t, rho);
        let g = f.gradient(q) * phi + &ot * f.gradient(&(&o * q)) * (1.0 - phi);
        m.tangent_project(q, &g)
    };
    let traj = integrate_field(m, &field, p, -rho, rho, &[], Events::default(), opts)?;
    Ok(traj.last().clone())
}

/// Landing residual: unstable-frame coordinates of the point where the
/// forward flow from `q` reaches `f(y) - delta` (or of `q` itself when it is
/// already above that level), provided it lies near `y`.
pub fn land(
    ctx: &ShootingContext<'_>,
    target: usize,
    q: &DVector<f64>,
    delta: f64,
    opts: &IntegratorOptions,
) -> Option<Landing> {
    let l = land_anywhere(ctx, target, q, delta, opts)?;
    ((&l.point - &ctx.crits[target].location).norm() < ctx.validity_radius()).then_some(l)
}

/// [`land`] without the proximity requirement.
pub fn land_anywhere(
    ctx: &ShootingContext<'_>,
    target: usize,
    q: &DVector<f64>,
    delta: f64,
    opts: &IntegratorOptions,
) -> Option<Landing> {
    let y = &ctx.crits[target];
    let (point, time) = if y.index == 0 || ctx.function.value(q) >= y.value - delta {
        (q.clone(), 0.0)
    } else {
        let field = GradientField {
            manifold: ctx.manifold,
            function: ctx.function,
            backward: false,
        };
        let events = Events {
            level: Some((ctx.function, y.value - delta)),
            dwell: true,
        };
        let horizon = 4.0 * ctx.settings.max_duration;
        let traj = integrate_field(ctx.manifold, &field, q, 0.0, horizon, &[], events, opts).ok()?;
        if traj.end != EndReason::Level {
            return None;
        }
        (traj.last().clone(), traj.end_time())
    };
    Some(Landing {
        residual: y.frames.unstable.transpose() * (&point - &y.location),
        point,
        time,
    })
}

/// A point of a tensor-grid scan.
#[derive(Clone, Debug)]
pub struct GridSample {
    pub params: Vec<f64>,
    pub norm: f64,
}

/// Axis values and periodicity of the scan grid.
#[derive(Clone, Debug)]
pub struct GridAxes {
    pub values: Vec<Vec<f64>>,
    pub periodic: Vec<bool>,
}

impl GridAxes {
    fn shape(&self) -> Vec<usize> {
        self.values.iter().map(Vec::len).collect()
    }
}

pub fn grid_axes(problem: &ShootingProblem, settings: &SolverSettings) -> GridAxes {
    let mut values = Vec::new();
    let mut periodic = Vec::new();
    for kind in problem.param_kinds() {
        match kind {
            ParamKind::Angle => {
                values.push(settings.angle_values(settings.angle_grid, TAU));
                periodic.push(true);
            }
            ParamKind::Polar => {
                let n = (settings.angle_grid / 4).max(4);
                values.push(
                    (0..n)
                        .map(|i| std::f64::consts::PI * (i as f64 + 0.5) / n as f64)
                        .collect(),
                );
                periodic.push(false);
            }
            ParamKind::Duration { .. } => {
                values.push(settings.duration_values());
                periodic.push(false);
            }
        }
    }
    GridAxes { values, periodic }
}

/// Residual norms over the full tensor grid, in row-major order of the
/// parameters. Flow segments are integrated once per prefix and sampled at
/// all grid durations.
pub fn scan(ctx: &ShootingContext<'_>, problem: &ShootingProblem, delta: f64) -> (GridAxes, Vec<GridSample>) {
    let axes = grid_axes(problem, ctx.settings);
    let opts = ctx.settings.scan_integrator();
    let jump_mats: Vec<DMatrix<f64>> = ctx
        .settings
        .angle_values(ctx.settings.angle_grid, TAU)
        .iter()
        .map(|&s| ctx.action.matrix(s))
        .collect();
    let mut out = Vec::new();
    let first = match &problem.stages[0] {
        Stage::Sphere(m) => m - 1,
        _ => 0,
    };
    let mut seed_params = Vec::new();
    enumerate_prefix(&axes.values[..first], &mut Vec::new(), &mut seed_params);
    for sp in seed_params {
        let Ok(p) = problem.start_point(ctx, &sp) else {
            push_invalid(&axes.values[first..], &sp, &mut out);
            continue;
        };
        scan_rec(ctx, problem, &axes, &jump_mats, 1, first, p, sp, delta, &opts, &mut out);
    }
    (axes, out)
}

fn enumerate_prefix(axes: &[Vec<f64>], prefix: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
    if axes.is_empty() {
        out.push(prefix.clone());
        return;
    }
    for &v in &axes[0] {
        prefix.push(v);
        enumerate_prefix(&axes[1..], prefix, out);
        prefix.pop();
    }
}

fn push_invalid(rest: &[Vec<f64>], prefix: &[f64], out: &mut Vec<GridSample>) {
    let mut all = Vec::new();
    enumerate_prefix(rest, &mut prefix.to_vec(), &mut all);
    out.extend(all.into_iter().map(|params| GridSample {
        params,
        norm: f64::INFINITY,
    }));
}

#[allow(clippy::too_many_arguments)]
fn scan_rec(
    ctx: &ShootingContext<'_>,
    problem: &ShootingProblem,
    axes: &GridAxes,
    jump_mats: &[DMatrix<f64>],
    stage_idx: usize,
    axis_idx: usize,
    p: DVector<f64>,
    prefix: Vec<f64>,
    delta: f64,
    opts: &IntegratorOptions,
    out: &mut Vec<GridSample>,
) {
    if stage_idx == problem.stages.len() {
        let norm = land(ctx, problem.target, &p, delta, opts)
            .map(|l| l.residual.norm())
            .unwrap_or(f64::INFINITY);
        out.push(GridSample { params: prefix, norm });
        return;
    }
    let values = &axes.values[axis_idx];
    let next: Vec<Option<DVector<f64>>> = match &problem.stages[stage_idx] {
        Stage::Flow { .. } => match flow_at_times(ctx.manifold, ctx.function, &p, values, opts) {
            Ok(states) => states.into_iter().map(Some).collect(),
            Err(_) => vec![None; values.len()],
        },
        Stage::Jump => jump_mats.iter().map(|o| ctx.manifold.retract(&(o * &p)).ok()).collect(),
        stage @ Stage::SmoothJump { .. } => values
            .iter()
            .map(|&s| apply_stage(ctx, stage, &p, s, opts).ok())
            .collect(),
        other => panic!("unexpected stage {other:?}"),
    };
    for (v, q) in values.iter().zip(next) {
        let mut pre = prefix.clone();
        pre.push(*v);
        match q {
            Some(q) => scan_rec(
                ctx,
                problem,
                axes,
                jump_mats,
                stage_idx + 1,
                axis_idx + 1,
                q,
                pre,
                delta,
                opts,
                out,
            ),
            None => push_invalid(&axes.values[axis_idx + 1..], &pre, out),
        }
    }
}

/// Grid samples with finite norm that are minimal among their neighbours.
pub fn grid_minima(axes: &GridAxes, samples: &[GridSample]) -> Vec<usize> {
    let shape = axes.shape();
    let d = shape.len();
    let mut strides = vec![1usize; d];
    for i in (0..d.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let mut out = Vec::new();
    for (flat, s) in samples.iter().enumerate() {
        if !s.norm.is_finite() {
            continue;
        }
        let idx: Vec<usize> = (0..d).map(|i| (flat / strides[i]) % shape[i]).collect();
        let mut is_min = true;
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            let mut nb = 0usize;
            let mut valid = true;
            let mut zero = true;
            for i in 0..d {
                let off = (c % 3) as i64 - 1;
                c /= 3;
                if off != 0 {
                    zero = false;
                }
                let mut j = idx[i] as i64 + off;
                if axes.periodic[i] {
                    j = j.rem_euclid(shape[i] as i64);
                } else if j < 0 || j >= shape[i] as i64 {
                    valid = false;
                    break;
                }
                nb += j as usize * strides[i];
            }
            if zero || !valid || nb == flat {
                continue;
            }
            let o = samples[nb].norm;
            if o < s.norm || (o == s.norm && nb < flat) {
                is_min = false;
                break;
            }
        }
        if is_min {
            out.push(flat);
        }
    }
    out.sort_by(|&a, &b| samples[a].norm.total_cmp(&samples[b].norm).then(a.cmp(&b)));
    out
}

/// Result of polishing one start.
#[derive(Clone, Debug)]
pub struct Polished {
    pub params: Vec<f64>,
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub landing_time: f64,
}

impl Polished {
    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.jacobian.singular_values().iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        sv
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }
}

/// Central-difference Jacobian of the residual.
pub fn jacobian(
    ctx: &ShootingContext<'_>,
    problem: &ShootingProblem,
    params: &[f64],
    delta: f64,
    opts: &IntegratorOptions,
) -> Option<DMatrix<f64>> {
    let h = ctx.settings.fd_step;
    let n = params.len();
    let r_dim = problem.residual_dim(ctx);
    let mut j = DMatrix::zeros(r_dim, n);
    for i in 0..n {
        let mut a = params.to_vec();
        let mut b = params.to_vec();
        a[i] += h;
        b[i] -= h;
        let ra = problem.evaluate(ctx, &a, delta, opts);
        let rb = problem.evaluate(ctx, &b, delta, opts);
        let col = match (ra, rb) {
            (Some(ra), Some(rb)) => (ra.residual - rb.residual) / (2.0 * h),
            (Some(ra), None) => {
                let r0 = problem.evaluate(ctx, params, delta, opts)?;
                (ra.residual - r0.residual) / h
            }
            (None, Some(rb)) => {
                let r0 = problem.evaluate(ctx, params, delta, opts)?;
                (r0.residual - rb.residual) / h
            }
            (None, None) => return None,
        };
        j.set_column(i, &col);
    }
    Some(j)
}

/// Gauss-Newton with backtracking at each landing level in turn.
pub fn polish(ctx: &ShootingContext<'_>, problem: &ShootingProblem, start: &[f64]) -> Option<Polished> {
    let opts = ctx.settings.integrator();
    let levels = landing_levels(ctx, problem);
    let mut params = start.to_vec();
    let last = levels.len() - 1;
    for (li, &delta) in levels.iter().enumerate() {
        let iters = if li == last { ctx.settings.newton_iters } else { 30 };
        params = gauss_newton(ctx, problem, &params, delta, iters, &opts)?;
    }
    let delta = levels[last];
    let l = problem.evaluate(ctx, &params, delta, &opts)?;
    let jac = jacobian(ctx, problem, &params, delta, &opts)?;
    Some(Polished {
        params,
        residual: l.residual,
        jacobian: jac,
        landing_time: l.time,
    })
}

/// Landing levels actually used: a single level suffices for a minimum target.
pub fn landing_levels(ctx: &ShootingContext<'_>, problem: &ShootingProblem) -> Vec<f64> {
    if ctx.crits[problem.target].index == 0 {
        vec![0.0]
    } else {
        ctx.settings.landing_levels.clone()
    }
}

pub fn gauss_newton(
    ctx: &ShootingContext<'_>,
    problem: &ShootingProblem,
    start: &[f64],
    delta: f64,
    iters: usize,
    opts: &IntegratorOptions,
) -> Option<Vec<f64>> {
    let mut params = start.to_vec();
    let mut r = problem.evaluate(ctx, &params, delta, opts)?.residual;
    let stop = ctx.settings.residual_tol * 1e-3;
    for _ in 0..iters {
        if r.norm() < stop {
            break;
        }
        let j = jacobian(ctx, problem, &params, delta, opts)?;
        let step = j.svd(true, true).solve(&r, 1e-12).ok()?;
        if step.norm() < 1e-15 {
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p - alpha * s).collect();
            if let Some(l) = problem.evaluate(ctx, &cand, delta, opts) {
                if l.residual.norm() < r.norm() {
                    params = cand;
                    r = l.residual;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(params)
}

/// Distance between parameter tuples, with angles compared modulo `2π`.
pub fn param_distance(kinds: &[ParamKind], a: &[f64], b: &[f64]) -> f64 {
    kinds
        .iter()
        .zip(a.iter().zip(b))
        .map(|(k, (x, y))| {
            let d = (x - y).abs();
            match k {
                ParamKind::Angle => {
                    let d = d.rem_euclid(TAU);
                    d.min(TAU - d)
                }
                _ => d,
            }
        })
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt()
}

pub fn normalize_params(kinds: &[ParamKind], params: &mut [f64]) {
    for (k, p) in kinds.iter().zip(params.iter_mut()) {
        if *k == ParamKind::Angle {
            *p = p.rem_euclid(TAU);
            if *p >= TAU {
                *p = 0.0;
            }
        }
    }
}

/// Polishes the best grid minima in parallel; order of the output follows
/// the order of `starts`.
pub fn polish_all(ctx: &ShootingContext<'_>, problem: &ShootingProblem, starts: &[Vec<f64>]) -> Vec<Polished> {
    starts
        .par_iter()
        .map(|s| polish(ctx, problem, s))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
