use std::f64::consts::TAU;

use serde::Serialize;

use super::shooting::{landing_levels, ShootingContext, ShootingProblem, Stage};
use super::solver::{jump_problems, solve_problems};
use crate::error::{Error, Result};

/// Outcome of the smooth-homotopy count for one pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothCount {
    pub source: String,
    pub target: String,
    pub rho: f64,
    pub roots: usize,
    pub parity: bool,
    pub method: String,
}

const SIGN_GRID: usize = 256;

/// Half the smallest distance between distinct critical points, capped at 1/2.
pub fn smooth_radius(ctx: &ShootingContext<'_>) -> Result<f64> {
    let mut best = (f64::INFINITY, 0, 0);
    for (i, a) in ctx.crits.iter().enumerate() {
        for (j, b) in ctx.crits.iter().enumerate().skip(i + 1) {
            let d = (&a.location - &b.location).norm();
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    let rho = 0.5 * best.0.min(1.0);
    if !(rho > 0.0) {
        return Err(Error::OrbitCollision {
            first: ctx.crits[best.1].id.clone(),
            second: ctx.crits[best.2].id.clone(),
        });
    }
    Ok(rho)
}

/// Counts one-jump lines from `x` to `y` with the time-dependent function
/// `F_ρ(p, s, t) = φ_ρ(t) f(p) + (1 - φ_ρ(t)) f(σ_s p)` in place of the jump.
///
/// With a single angle parameter the roots are located by sign changes of
/// the landing coordinate; otherwise by the grid-seeded Newton solver.
pub fn smooth_continuation_crosscheck(ctx: &ShootingContext<'_>, x: usize, y: usize) -> Result<SmoothCount> {
    let (cx, cy) = (&ctx.crits[x], &ctx.crits[y]);
    if cy.index + 1 != cx.index {
        return Err(Error::Precondition(format!(
            "smooth cross-check needs index({}) = index({}) - 1",
            cy.id, cx.id
        )));
    }
    let rho = smooth_radius(ctx)?;
    let problems: Vec<ShootingProblem> = jump_problems(ctx, x, y, 1)
        .into_iter()
        .map(|mut p| {
            for s in &mut p.stages {
                if *s == Stage::Jump {
                    *s = Stage::SmoothJump { rho };
                }
            }
            p
        })
        .collect();
    let single = problems.len() == 1 && problems[0].num_params() == 1 && problems[0].residual_dim(ctx) == 1;
    let (roots, parity, method) = if ctx.action.is_trivial() {
        (0, false, "angle-independent family".to_string())
    } else if single {
        let roots = sign_change_roots(ctx, &problems[0]);
        (roots, roots % 2 == 1, "sign changes".to_string())
    } else {
        let e = solve_problems(ctx, &problems, 1)?;
        (e.solutions.len(), e.parity(), "grid-seeded Newton".to_string())
    };
    Ok(SmoothCount {
        source: cx.id.clone(),
        target: cy.id.clone(),
        rho,
        roots,
        parity,
        method,
    })
}

fn sign_change_roots(ctx: &ShootingContext<'_>, problem: &ShootingProblem) -> usize {
    let delta = landing_levels(ctx, problem)[0];
    let opts = ctx.settings.integrator();
    let eval = |s: f64| problem.evaluate(ctx, &[s], delta, &opts).map(|l| l.residual[0]);
    let grid: Vec<f64> = (0..SIGN_GRID).map(|i| TAU * i as f64 / SIGN_GRID as f64).collect();
    let values: Vec<Option<f64>> = grid.iter().map(|&s| eval(s)).collect();
    let mut roots = 0;
    for i in 0..SIGN_GRID {
        let j = (i + 1) % SIGN_GRID;
        let (Some(a), Some(b)) = (values[i], values[j]) else {
            continue;
        };
        if a == 0.0 {
            roots += 1;
            continue;
        }
        if a.signum() == b.signum() || b == 0.0 {
            continue;
        }
        let lo = grid[i];
        let hi = if j == 0 { TAU } else { grid[j] };
        if let Some(r) = illinois(&eval, lo, a, hi, b) {
            if r.abs() < 1e-6 {
                roots += 1;
            }
        }
    }
    roots
}

/// Regula falsi with the Illinois modification; returns the final residual.
fn illinois(eval: &dyn Fn(f64) -> Option<f64>, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64) -> Option<f64> {
    let mut side = 0i8;
    let mut last = fb;
    for _ in 0..80 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = eval(c)?;
        last = fc;
        if fc.abs() < 1e-12 || (b - a).abs() < 1e-14 {
            break;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    Some(last)
}
