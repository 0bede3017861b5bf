use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{riemannian_gradient, EmbeddedManifold, ScalarField};

/// Dormand-Prince 5(4) coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// A (possibly time-dependent) tangent vector field on the manifold.
pub trait VectorField {
    fn eval(&self, t: f64, p: &DVector<f64>) -> DVector<f64>;
}

impl<F: Fn(f64, &DVector<f64>) -> DVector<f64>> VectorField for F {
    fn eval(&self, t: f64, p: &DVector<f64>) -> DVector<f64> {
        self(t, p)
    }
}

/// The gradient field `±∇f` for the induced metric.
pub struct GradientField<'a> {
    pub manifold: &'a EmbeddedManifold,
    pub function: &'a ScalarField,
    pub backward: bool,
}

impl VectorField for GradientField<'_> {
    fn eval(&self, _t: f64, p: &DVector<f64>) -> DVector<f64> {
        let g = riemannian_gradient(self.manifold, self.function, p);
        if self.backward {
            -g
        } else {
            g
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Field norm below which the trajectory is considered at rest.
    pub dwell_threshold: f64,
    /// Time the field must stay below the threshold to declare arrival.
    pub dwell_time: f64,
    /// Keep every accepted step (otherwise only the end points and requested times).
    pub record: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-13,
            h_max: 0.5,
            max_steps: 2_000_000,
            dwell_threshold: 1e-10,
            dwell_time: 1.0,
            record: true,
        }
    }
}

impl IntegratorOptions {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self.atol = (rtol * 1e-2).max(1e-14);
        self
    }

    pub fn unrecorded(mut self) -> Self {
        self.record = false;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum EndReason {
    /// The field stayed below the dwell threshold for the dwell time.
    Converged,
    /// The requested level of the monitored function was reached.
    Level,
    /// The final time was reached.
    Horizon,
}

/// A time-ordered sequence of manifold points.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<(f64, DVector<f64>)>,
    pub end: EndReason,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        &self.samples.last().expect("trajectory has samples").1
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().expect("trajectory has samples").0
    }

    pub fn f_values(&self, f: &ScalarField) -> Vec<f64> {
        self.samples.iter().map(|(_, p)| f.value(p)).collect()
    }

    /// Largest decrease of `f` between consecutive samples (0 if monotone).
    pub fn monotonicity_violation(&self, f: &ScalarField) -> f64 {
        self.f_values(f)
            .windows(2)
            .map(|w| (w[0] - w[1]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn constraint_drift(&self, m: &EmbeddedManifold) -> f64 {
        self.samples
            .iter()
            .map(|(_, p)| m.constraint_norm(p))
            .fold(0.0, f64::max)
    }
}

/// Stop conditions besides the final time.
#[derive(Clone, Copy, Default)]
pub struct Events<'a> {
    /// Stop exactly where the function reaches the given level (from below).
    pub level: Option<(&'a ScalarField, f64)>,
    /// Stop when the field has been negligible for the dwell time.
    pub dwell: bool,
}

/// Adaptive Dormand-Prince integration of `field` on `m` with a retraction
/// after each accepted step. States at the sorted `stations` (times within
/// `(t0, t_end]`) are always recorded.
pub fn integrate_field(
    m: &EmbeddedManifold,
    field: &dyn VectorField,
    p0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    stations: &[f64],
    events: Events<'_>,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let mut t = t0;
    let mut p = p0.clone();
    let mut samples = vec![(t, p.clone())];
    let mut h = opts.h_init.min(opts.h_max);
    let mut k1 = field.eval(t, &p);
    let mut dwell = 0.0;
    let mut next_station = stations.iter().position(|&s| s > t0).unwrap_or(stations.len());

    if let Some((f, level)) = events.level {
        if f.value(&p) >= level {
            return Ok(Trajectory {
                samples,
                end: EndReason::Level,
            });
        }
    }

    for _ in 0..opts.max_steps {
        if t >= t_end {
            break;
        }
        let mut target = t_end;
        if next_station < stations.len() {
            target = target.min(stations[next_station]);
        }
        let clipped = t + h >= target;
        let step_h = if clipped { target - t } else { h };

        let (y5, err) = dopri_step(field, t, &p, &k1, step_h);
        let scale_err = error_norm(&p, &y5, &err, opts);
        if !scale_err.is_finite() || scale_err > 1.0 {
            let fac = if scale_err.is_finite() {
                (0.9 * scale_err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h = step_h * fac;
            if h < opts.h_min {
                return Err(Error::StiffRegion {
                    t,
                    point: p.iter().copied().collect(),
                });
            }
            continue;
        }

        let p_new = m.retract(&y5)?;
        let t_new = if clipped { target } else { t + step_h };

        if let Some((f, level)) = events.level {
            if f.value(&p_new) >= level {
                let (tl, pl) = locate_level(m, field, f, level, t, &p, &k1, step_h)?;
                samples.push((tl, pl));
                return Ok(Trajectory {
                    samples,
                    end: EndReason::Level,
                });
            }
        }

        t = t_new;
        p = p_new;
        k1 = field.eval(t, &p);
        let at_station = next_station < stations.len() && clipped && target == stations[next_station];
        if at_station {
            next_station += 1;
        }
        if opts.record || at_station {
            samples.push((t, p.clone()));
        }

        if events.dwell {
            if k1.norm() < opts.dwell_threshold {
                dwell += step_h;
                if dwell >= opts.dwell_time {
                    break_with(&mut samples, t, &p, opts.record || at_station);
                    return Ok(Trajectory {
                        samples,
                        end: EndReason::Converged,
                    });
                }
            } else {
                dwell = 0.0;
            }
        }

        if !clipped {
            let fac = if scale_err == 0.0 {
                5.0
            } else {
                (0.9 * scale_err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (step_h * fac).min(opts.h_max);
        }
    }
    break_with(&mut samples, t, &p, false);
    Ok(Trajectory {
        samples,
        end: EndReason::Horizon,
    })
}

fn break_with(samples: &mut Vec<(f64, DVector<f64>)>, t: f64, p: &DVector<f64>, already: bool) {
    if !already && samples.last().map(|s| s.0) != Some(t) {
        samples.push((t, p.clone()));
    }
}

fn dopri_step(
    field: &dyn VectorField,
    t: f64,
    p: &DVector<f64>,
    k1: &DVector<f64>,
    h: f64,
) -> (DVector<f64>, DVector<f64>) {
    let mut ks: Vec<DVector<f64>> = Vec::with_capacity(7);
    ks.push(k1.clone());
    for i in 1..7 {
        let mut y = p.clone();
        for (j, k) in ks.iter().enumerate() {
            if A[i][j] != 0.0 {
                y.axpy(h * A[i][j], k, 1.0);
            }
        }
        ks.push(field.eval(t + C[i] * h, &y));
    }
    let mut y5 = p.clone();
    let mut err = DVector::zeros(p.len());
    for (i, k) in ks.iter().enumerate() {
        if B5[i] != 0.0 {
            y5.axpy(h * B5[i], k, 1.0);
        }
        let e = B5[i] - B4[i];
        if e != 0.0 {
            err.axpy(h * e, k, 1.0);
        }
    }
    (y5, err)
}

fn error_norm(p: &DVector<f64>, y: &DVector<f64>, err: &DVector<f64>, opts: &IntegratorOptions) -> f64 {
    let n = p.len() as f64;
    let s: f64 = (0..p.len())
        .map(|i| {
            let sc = opts.atol + opts.rtol * p[i].abs().max(y[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

/// Finds the step length within `(0, h]` where `f` reaches `level`, by the
/// Illinois variant of regula falsi on single Runge-Kutta steps.
#[allow(clippy::too_many_arguments)]
fn locate_level(
    m: &EmbeddedManifold,
    field: &dyn VectorField,
    f: &ScalarField,
    level: f64,
    t: f64,
    p: &DVector<f64>,
    k1: &DVector<f64>,
    h: f64,
) -> Result<(f64, DVector<f64>)> {
    let eval = |s: f64| -> Result<(f64, DVector<f64>)> {
        let (y, _) = dopri_step(field, t, p, k1, s);
        let q = m.retract(&y)?;
        Ok((f.value(&q) - level, q))
    };
    let (mut a, mut ga) = (0.0, f.value(p) - level);
    let (mut b, (mut gb, mut qb)) = (h, eval(h)?);
    let tol = 1e-14 * level.abs().max(1.0);
    let mut side = 0i8;
    for _ in 0..60 {
        if gb.abs() <= tol || (b - a).abs() < 1e-15 * h.max(1e-300) {
            break;
        }
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let (gc, qc) = eval(c)?;
        if gc.abs() <= tol {
            return Ok((t + c, qc));
        }
        if (gc > 0.0) == (gb > 0.0) {
            b = c;
            gb = gc;
            qb = qc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    Ok((t + b, qb))
}
