//! The ascending gradient flow on the manifold: integration, limit
//! classification and invariant frames at critical points.

mod frames;
mod integrator;

use std::io::Write;

use nalgebra::DVector;

pub use frames::{
    local_invariant_frames, sample_unstable_sphere, sphere_direction, unstable_seed, InvariantFrames, DEGENERACY_TOL,
    UNSTABLE_SPHERE_RADIUS,
};
pub use integrator::{integrate_field, EndReason, Events, GradientField, IntegratorOptions, Trajectory, VectorField};

use crate::error::{Error, Result};
use crate::geometry::{riemannian_gradient, EmbeddedManifold, ScalarField};
use crate::morse::CriticalPoint;

pub const CAPTURE_RADIUS: f64 = 1e-4;
pub const CAPTURE_GRADIENT: f64 = 1e-8;
pub const DEFAULT_HORIZON: f64 = 200.0;

/// Ascending flow from `p0` until arrival at rest or `horizon`.
pub fn integrate(
    m: &EmbeddedManifold,
    f: &ScalarField,
    p0: &DVector<f64>,
    horizon: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    flow_until_rest(m, f, p0, horizon, false, opts)
}

/// Flow of `∇f` (or `-∇f` when `backward`) from `p0` until arrival at rest.
pub fn flow_until_rest(
    m: &EmbeddedManifold,
    f: &ScalarField,
    p0: &DVector<f64>,
    horizon: f64,
    backward: bool,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let field = GradientField {
        manifold: m,
        function: f,
        backward,
    };
    let events = Events {
        dwell: true,
        ..Default::default()
    };
    integrate_field(m, &field, p0, 0.0, horizon, &[], events, opts)
}

/// `Φ_t(p)` for a signed time `t`; stops early only if the flow comes to rest.
pub fn flow_for(
    m: &EmbeddedManifold,
    f: &ScalarField,
    p: &DVector<f64>,
    t: f64,
    opts: &IntegratorOptions,
) -> Result<DVector<f64>> {
    if t == 0.0 {
        return Ok(p.clone());
    }
    let field = GradientField {
        manifold: m,
        function: f,
        backward: t < 0.0,
    };
    let events = Events {
        dwell: true,
        ..Default::default()
    };
    let opts = opts.clone().unrecorded();
    Ok(integrate_field(m, &field, p, 0.0, t.abs(), &[], events, &opts)?
        .last()
        .clone())
}

/// The recorded trajectory `τ ↦ Φ_τ(p)` between `min(0, t)` and `max(0, t)`,
/// in increasing time.
pub fn flow_segment(
    m: &EmbeddedManifold,
    f: &ScalarField,
    p: &DVector<f64>,
    t: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let field = GradientField {
        manifold: m,
        function: f,
        backward: t < 0.0,
    };
    let events = Events {
        dwell: true,
        ..Default::default()
    };
    let mut traj = integrate_field(m, &field, p, 0.0, t.abs(), &[], events, opts)?;
    if t < 0.0 {
        traj.samples.reverse();
        for (tau, _) in &mut traj.samples {
            *tau = -*tau;
        }
    }
    Ok(traj)
}

/// States `Φ_t(p)` at each of the sorted nonnegative `times`.
pub fn flow_at_times(
    m: &EmbeddedManifold,
    f: &ScalarField,
    p: &DVector<f64>,
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<DVector<f64>>> {
    let field = GradientField {
        manifold: m,
        function: f,
        backward: false,
    };
    let t_end = times.last().copied().unwrap_or(0.0);
    let events = Events {
        dwell: true,
        ..Default::default()
    };
    let opts = opts.clone().unrecorded();
    let traj = integrate_field(m, &field, p, 0.0, t_end, times, events, &opts)?;
    // After arrival at rest every later state is the final one.
    let mut out = Vec::with_capacity(times.len());
    let mut j = 0;
    for &t in times {
        while j + 1 < traj.samples.len() && traj.samples[j].0 < t {
            j += 1;
        }
        out.push(if traj.samples[j].0 == t {
            traj.samples[j].1.clone()
        } else {
            traj.last().clone()
        });
    }
    Ok(out)
}

/// Index of the critical point the trajectory ended at, if any.
pub fn classify_limit(
    m: &EmbeddedManifold,
    f: &ScalarField,
    t: &Trajectory,
    crits: &[CriticalPoint],
) -> Result<Option<usize>> {
    classify_point(m, f, t.last(), crits)
}

pub fn classify_point(
    m: &EmbeddedManifold,
    f: &ScalarField,
    p: &DVector<f64>,
    crits: &[CriticalPoint],
) -> Result<Option<usize>> {
    let near: Vec<usize> = crits
        .iter()
        .enumerate()
        .filter(|(_, c)| (&c.location - p).norm() < CAPTURE_RADIUS)
        .map(|(i, _)| i)
        .collect();
    match near.as_slice() {
        [] => Ok(None),
        [i] => Ok((riemannian_gradient(m, f, p).norm() < CAPTURE_GRADIENT).then_some(*i)),
        [a, b, ..] => Err(Error::AmbiguousCapture { first: *a, second: *b }),
    }
}

/// Writes `t, x1..xN, f, grad_norm` rows for every sample.
pub fn write_trajectory_csv<W: Write>(w: W, m: &EmbeddedManifold, f: &ScalarField, t: &Trajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=m.ambient_dim()).map(|i| format!("x{i}")));
    header.push("f".into());
    header.push("grad_norm".into());
    out.write_record(&header)?;
    for (time, p) in &t.samples {
        let mut row = vec![format!("{time:.12e}")];
        row.extend(p.iter().map(|v| format!("{v:.15e}")));
        row.push(format!("{:.15e}", f.value(p)));
        row.push(format!("{:.6e}", riemannian_gradient(m, f, p).norm()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
