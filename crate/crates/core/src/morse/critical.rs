use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{local_invariant_frames, InvariantFrames};
use crate::geometry::{riemannian_gradient, tangent_hessian, EmbeddedManifold, ScalarField};

pub const DEDUP_RADIUS: f64 = 1e-6;
pub const CRITICAL_GRADIENT_TOL: f64 = 1e-10;
const NEWTON_ITERS: usize = 60;

/// A non-degenerate critical point of `f` on the manifold.
#[derive(Clone, Debug)]
pub struct CriticalPoint {
    pub id: String,
    pub location: DVector<f64>,
    pub value: f64,
    /// Morse index: number of negative tangent-Hessian eigenvalues.
    pub index: usize,
    pub frames: InvariantFrames,
}

impl CriticalPoint {
    pub fn hessian_spectrum(&self) -> Vec<f64> {
        self.frames.spectrum()
    }

    pub fn summary(&self) -> CriticalSummary {
        CriticalSummary {
            id: self.id.clone(),
            index: self.index,
            value: self.value,
            location: self.location.iter().copied().collect(),
            hessian_spectrum: self.hessian_spectrum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalSummary {
    pub id: String,
    pub index: usize,
    pub value: f64,
    pub location: Vec<f64>,
    pub hessian_spectrum: Vec<f64>,
}

/// Multi-start Riemannian Newton from the local minima of `|∇f|` over the
/// seed cloud, followed by deduplication and classification.
///
/// Points are ordered by index, then value; ids are `x<index>.<ordinal>`.
pub fn find_critical_points(
    m: &EmbeddedManifold,
    f: &ScalarField,
    seeds: &[DVector<f64>],
    cell: f64,
) -> Result<Vec<CriticalPoint>> {
    let starts = gradient_minima(m, f, seeds, cell);
    let mut found: Vec<DVector<f64>> = Vec::new();
    for s in &starts {
        let Some(p) = newton_critical(m, f, s) else {
            continue;
        };
        if found.iter().all(|q| (q - &p).norm() > DEDUP_RADIUS) {
            found.push(p);
        }
    }
    let mut crits = Vec::with_capacity(found.len());
    for p in found {
        let frames = local_invariant_frames(m, f, &p).map_err(|e| match e {
            Error::DegenerateCriticalPoint { point, .. } => Error::NotMorse { point },
            other => other,
        })?;
        crits.push(CriticalPoint {
            id: String::new(),
            value: f.value(&p),
            index: frames.stable_dim(),
            location: p,
            frames,
        });
    }
    crits.sort_by(|a, b| {
        a.index.cmp(&b.index).then(a.value.total_cmp(&b.value)).then_with(|| {
            a.location
                .iter()
                .zip(b.location.iter())
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut ordinal: HashMap<usize, usize> = HashMap::new();
    for c in &mut crits {
        let o = ordinal.entry(c.index).or_insert(0);
        c.id = format!("x{}.{}", c.index, o);
        *o += 1;
    }
    Ok(crits)
}

/// Seeds whose gradient norm is minimal among all seeds within two cells.
fn gradient_minima(m: &EmbeddedManifold, f: &ScalarField, seeds: &[DVector<f64>], cell: f64) -> Vec<DVector<f64>> {
    let g: Vec<f64> = seeds.iter().map(|p| riemannian_gradient(m, f, p).norm()).collect();
    let key = |p: &DVector<f64>| -> Vec<i64> { p.iter().map(|v| (v / cell).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in seeds.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let nn = m.ambient_dim();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(nn as u32))
        .map(|mut c| {
            (0..nn)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for (i, p) in seeds.iter().enumerate() {
        let base = key(p);
        let mut is_min = true;
        'outer: for off in &offsets {
            let k: Vec<i64> = base.iter().zip(off).map(|(a, b)| a + b).collect();
            if let Some(list) = grid.get(&k) {
                for &j in list {
                    if j != i && (g[j] < g[i] || (g[j] == g[i] && j < i)) && (&seeds[j] - p).norm() < 2.0 * cell {
                        is_min = false;
                        break 'outer;
                    }
                }
            }
        }
        if is_min {
            out.push(p.clone());
        }
    }
    out
}

/// Riemannian Newton iteration on the gradient with backtracking on `|∇f|`.
fn newton_critical(m: &EmbeddedManifold, f: &ScalarField, start: &DVector<f64>) -> Option<DVector<f64>> {
    let mut p = start.clone();
    let mut gn = riemannian_gradient(m, f, &p).norm();
    let max_step = 0.5 * m.extent();
    for _ in 0..NEWTON_ITERS {
        if gn < CRITICAL_GRADIENT_TOL * 1e-2 {
            break;
        }
        let (basis, h) = tangent_hessian(m, f, &p);
        let g = basis.transpose() * f.gradient(&p);
        let svd = h.svd(true, true);
        let step = svd.solve(&g, 1e-14).ok()?;
        let mut v = -(&basis * step);
        if v.norm() > max_step {
            v *= max_step / v.norm();
        }
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            if let Ok(q) = m.retract(&(&p + &v * alpha)) {
                let qn = riemannian_gradient(m, f, &q).norm();
                if qn < gn {
                    p = q;
                    gn = qn;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (gn < CRITICAL_GRADIENT_TOL).then_some(p)
}
