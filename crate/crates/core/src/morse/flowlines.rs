use std::collections::BTreeMap;

use std::f64::consts::TAU;

use nalgebra::DVector;
use serde::Serialize;

use super::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::flow::{
    classify_limit, flow_until_rest, sample_unstable_sphere, sphere_direction, unstable_seed, DEFAULT_HORIZON,
    UNSTABLE_SPHERE_RADIUS,
};
use crate::jump::{land_anywhere, solve_problems, SeedSpec, ShootingContext, ShootingProblem, Stage};
use crate::z2t::BitMatrix;

const BOUNDARY_TOL: f64 = 1e-13;
const LANDING_DELTA: f64 = 1e-8;
const LINGER_TOL: f64 = 1e-2;

/// One flow line from `source` to `target`, identified by its seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowLineRecord {
    pub source: String,
    pub target: String,
    pub seed: SeedSpec,
    #[serde(skip)]
    pub start: Vec<f64>,
}

/// Flow lines between consecutive-index critical points, with their parity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowLineCount {
    pub source: String,
    pub target: String,
    pub lines: Vec<FlowLineRecord>,
    pub parity: bool,
}

/// The ordinary differential `d`, as counts `n(x, y)` over pairs with
/// `index(y) = index(x) + 1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MorseDifferential {
    pub pairs: Vec<FlowLineCount>,
    #[serde(skip)]
    pub counts: BTreeMap<(usize, usize), bool>,
}

impl MorseDifferential {
    pub fn count(&self, x: usize, y: usize) -> bool {
        self.counts.get(&(x, y)).copied().unwrap_or(false)
    }

    /// Z2 matrix of `d` from index `l` to index `l + 1`
    /// (rows: targets, columns: sources, in critical-point order).
    pub fn matrix(&self, crits: &[CriticalPoint], l: usize) -> BitMatrix {
        let src: Vec<usize> = (0..crits.len()).filter(|&i| crits[i].index == l).collect();
        let dst: Vec<usize> = (0..crits.len()).filter(|&i| crits[i].index == l + 1).collect();
        let mut m = BitMatrix::zeros(dst.len(), src.len());
        for (c, &x) in src.iter().enumerate() {
            for (r, &y) in dst.iter().enumerate() {
                if self.count(x, y) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }
}

/// All flow lines leaving `x` toward critical points of index `index(x) + 1`,
/// grouped by target.
///
/// One unstable direction: both seeds are classified by their limits. A
/// minimum: the two stable branches of every index-1 target are followed
/// backward and classified. Two:
/// the landing coordinate is followed around the unstable circle. More:
/// the flow lines are the roots of the landing residual at the target,
/// parametrized by the direction on the unstable sphere.
pub fn flow_lines_from(ctx: &ShootingContext<'_>, x: usize) -> Result<Vec<FlowLineRecord>> {
    let cx = &ctx.crits[x];
    let m = ctx.manifold;
    let f = ctx.function;
    let opts = ctx.settings.integrator();
    let limit_of = |p: &DVector<f64>| -> Result<Option<usize>> {
        let t = flow_until_rest(m, f, p, DEFAULT_HORIZON, false, &opts)?;
        classify_limit(m, f, &t, ctx.crits)
    };
    let record = |y: usize, seed: SeedSpec, start: &DVector<f64>| FlowLineRecord {
        source: cx.id.clone(),
        target: ctx.crits[y].id.clone(),
        seed,
        start: start.iter().copied().collect(),
    };
    let mut out = Vec::new();
    match cx.frames.unstable_dim() {
        0 => {}
        dim if dim >= 2 && cx.index == 0 => {
            for (y, cy) in ctx.crits.iter().enumerate() {
                if cy.index != 1 {
                    continue;
                }
                for sign in [1.0, -1.0] {
                    let seed =
                        m.retract(&(&cy.location + cy.frames.stable.column(0) * (sign * UNSTABLE_SPHERE_RADIUS)))?;
                    let t = flow_until_rest(m, f, &seed, DEFAULT_HORIZON, true, &opts)?;
                    if classify_limit(m, f, &t, ctx.crits)? == Some(x) {
                        out.push(record(y, SeedSpec::TargetBranch { sign }, &seed));
                    }
                }
            }
        }
        1 => {
            let seeds = sample_unstable_sphere(m, &cx.location, &cx.frames, UNSTABLE_SPHERE_RADIUS, 2)?;
            for (seed, sign) in seeds.iter().zip([1.0, -1.0]) {
                if let Some(y) = limit_of(seed)? {
                    if ctx.crits[y].index == cx.index + 1 {
                        out.push(record(y, SeedSpec::Branch { sign }, seed));
                    }
                }
            }
        }
        2 => {
            let targets: Vec<usize> = (0..ctx.crits.len())
                .filter(|&y| ctx.crits[y].index == cx.index + 1)
                .collect();
            for (y, a) in circle_roots(ctx, x, &targets)? {
                let seed = unstable_seed(
                    m,
                    &cx.location,
                    &cx.frames,
                    &sphere_direction(2, &[a]),
                    UNSTABLE_SPHERE_RADIUS,
                )?;
                out.push(record(y, SeedSpec::Sphere { angles: vec![a] }, &seed));
            }
        }
        dim => {
            for (y, cy) in ctx.crits.iter().enumerate() {
                if cy.index != cx.index + 1 {
                    continue;
                }
                let problem = ShootingProblem {
                    source: x,
                    target: y,
                    stages: vec![Stage::Sphere(dim)],
                };
                let e = solve_problems(ctx, &[problem], 0)?;
                for s in e.solutions {
                    let SeedSpec::Sphere { angles } = &s.config.seed else {
                        unreachable!("sphere seeds")
                    };
                    let seed = unstable_seed(
                        m,
                        &cx.location,
                        &cx.frames,
                        &sphere_direction(dim, angles),
                        UNSTABLE_SPHERE_RADIUS,
                    )?;
                    out.push(record(y, s.config.seed.clone(), &seed));
                }
            }
        }
    }
    Ok(out)
}

/// Seed angles on the unstable circle of `x` whose trajectories are flow
/// lines to one of `targets`.
///
/// The scalar landing coordinate at each target is tracked around the
/// circle without a proximity cutoff; every change of sign or of
/// definedness between neighbouring sample angles is bisected, and
/// boundaries whose trajectory does not land near the target are
/// discarded. Separatrices cluster next to each other when a flow line
/// passes close to another critical point, so the samples are refined
/// geometrically around every boundary found until no new one appears.
fn circle_roots(ctx: &ShootingContext<'_>, x: usize, targets: &[usize]) -> Result<Vec<(usize, f64)>> {
    let cx = &ctx.crits[x];
    let opts = ctx.settings.integrator();
    let seed_at = |a: f64| {
        unstable_seed(
            ctx.manifold,
            &cx.location,
            &cx.frames,
            &sphere_direction(2, &[a]),
            UNSTABLE_SPHERE_RADIUS,
        )
    };
    let delta = |y: usize| if ctx.crits[y].index == 0 { 0.0 } else { LANDING_DELTA };
    let state = |y: usize, a: f64| -> Result<Option<bool>> {
        Ok(land_anywhere(ctx, y, &seed_at(a)?, delta(y), &opts).map(|l| l.residual[0] > 0.0))
    };
    let n = ctx.settings.angle_grid.max(8);
    let mut samples: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    let mut boundaries: Vec<(usize, f64)> = Vec::new();
    let mut roots = Vec::new();
    loop {
        let mut fresh = Vec::new();
        for &y in targets {
            let states = samples.iter().map(|&a| state(y, a)).collect::<Result<Vec<_>>>()?;
            for i in 0..samples.len() {
                let j = (i + 1) % samples.len();
                if states[i] == states[j] {
                    continue;
                }
                let (mut lo, mut hi) = (samples[i], samples[j]);
                if j == 0 {
                    hi += TAU;
                }
                while hi - lo > BOUNDARY_TOL * hi.abs().max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if state(y, mid)? == states[i] {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let a = (0.5 * (lo + hi)).rem_euclid(TAU);
                if boundaries.iter().any(|&(z, b)| z == y && angle_gap(a, b) < 1e-11) {
                    continue;
                }
                boundaries.push((y, a));
                fresh.push(a);
                if let Some(l) = land_anywhere(ctx, y, &seed_at(a)?, delta(y), &opts) {
                    if (&l.point - &ctx.crits[y].location).norm() < LINGER_TOL {
                        roots.push((y, a));
                    }
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        for a in fresh {
            for e in (4..=48).map(|k| 10f64.powf(-0.25 * k as f64)) {
                samples.push((a - e).rem_euclid(TAU));
                samples.push((a + e).rem_euclid(TAU));
            }
        }
        samples.sort_by(f64::total_cmp);
        samples.dedup_by(|u, v| (*u - *v).abs() < 1e-13);
    }
    roots.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(roots)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// `n(x, y)` for `index(y) = index(x) + 1`.
pub fn count_flow_lines(ctx: &ShootingContext<'_>, x: usize, y: usize) -> Result<FlowLineCount> {
    if ctx.crits[y].index != ctx.crits[x].index + 1 {
        return Err(Error::Precondition(format!(
            "flow-line count needs index({}) = index({}) + 1",
            ctx.crits[y].id, ctx.crits[x].id
        )));
    }
    let lines: Vec<FlowLineRecord> = flow_lines_from(ctx, x)?
        .into_iter()
        .filter(|l| l.target == ctx.crits[y].id)
        .collect();
    Ok(FlowLineCount {
        source: ctx.crits[x].id.clone(),
        target: ctx.crits[y].id.clone(),
        parity: lines.len() % 2 == 1,
        lines,
    })
}

/// Assembles `d` over all consecutive-index pairs and checks `d² = 0`.
pub fn morse_differential(ctx: &ShootingContext<'_>) -> Result<MorseDifferential> {
    let crits = ctx.crits;
    let mut diff = MorseDifferential::default();
    for (x, cx) in crits.iter().enumerate() {
        let has_targets = crits.iter().any(|c| c.index == cx.index + 1);
        if !has_targets {
            continue;
        }
        let lines = flow_lines_from(ctx, x)?;
        for (y, cy) in crits.iter().enumerate() {
            if cy.index != cx.index + 1 {
                continue;
            }
            let ls: Vec<FlowLineRecord> = lines.iter().filter(|l| l.target == cy.id).cloned().collect();
            let parity = ls.len() % 2 == 1;
            diff.counts.insert((x, y), parity);
            diff.pairs.push(FlowLineCount {
                source: cx.id.clone(),
                target: cy.id.clone(),
                lines: ls,
                parity,
            });
        }
    }
    check_d_squared(crits, &diff)?;
    Ok(diff)
}

fn check_d_squared(crits: &[CriticalPoint], diff: &MorseDifferential) -> Result<()> {
    for (x, cx) in crits.iter().enumerate() {
        for (z, cz) in crits.iter().enumerate() {
            if cz.index != cx.index + 2 {
                continue;
            }
            let through = crits
                .iter()
                .enumerate()
                .filter(|(_, c)| c.index == cx.index + 1)
                .filter(|(y, _)| diff.count(x, *y) && diff.count(*y, z))
                .count();
            if through % 2 == 1 {
                return Err(Error::CountInconsistency {
                    from: cx.id.clone(),
                    to: cz.id.clone(),
                });
            }
        }
    }
    Ok(())
}
