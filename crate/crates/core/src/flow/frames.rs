use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{tangent_hessian, EmbeddedManifold, ScalarField};

pub const DEGENERACY_TOL: f64 = 1e-8;
pub const UNSTABLE_SPHERE_RADIUS: f64 = 1e-3;

/// Local linear models of the unstable and stable manifolds at a critical
/// point, as ambient orthonormal columns.
#[derive(Clone, Debug)]
pub struct InvariantFrames {
    /// Positive-eigenvalue directions (ascent leaves along these).
    pub unstable: DMatrix<f64>,
    /// Negative-eigenvalue directions.
    pub stable: DMatrix<f64>,
    pub unstable_eigenvalues: Vec<f64>,
    pub stable_eigenvalues: Vec<f64>,
}

impl InvariantFrames {
    pub fn unstable_dim(&self) -> usize {
        self.unstable.ncols()
    }

    pub fn stable_dim(&self) -> usize {
        self.stable.ncols()
    }

    /// Full tangent-Hessian spectrum, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .stable_eigenvalues
            .iter()
            .chain(&self.unstable_eigenvalues)
            .copied()
            .collect();
        s.sort_by(f64::total_cmp);
        s
    }
}

/// Eigen-decomposition of the tangent Hessian at a critical point.
pub fn local_invariant_frames(m: &EmbeddedManifold, f: &ScalarField, p: &DVector<f64>) -> Result<InvariantFrames> {
    let (basis, h) = tangent_hessian(m, f, p);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let smallest = eig.eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if smallest < DEGENERACY_TOL {
        return Err(Error::DegenerateCriticalPoint {
            point: p.iter().copied().collect(),
            eigenvalue: smallest,
        });
    }
    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    let mut stable_eigenvalues = Vec::new();
    let mut unstable_eigenvalues = Vec::new();
    for i in order {
        let lam = eig.eigenvalues[i];
        let mut v = &basis * eig.eigenvectors.column(i);
        // Fix the sign so frames are reproducible.
        let k = v.iamax();
        if v[k] < 0.0 {
            v = -v;
        }
        if lam > 0.0 {
            unstable.push(v);
            unstable_eigenvalues.push(lam);
        } else {
            stable.push(v);
            stable_eigenvalues.push(lam);
        }
    }
    let nn = m.ambient_dim();
    let to_matrix = |cols: &[DVector<f64>]| {
        if cols.is_empty() {
            DMatrix::zeros(nn, 0)
        } else {
            DMatrix::from_columns(cols)
        }
    };
    Ok(InvariantFrames {
        unstable: to_matrix(&unstable),
        stable: to_matrix(&stable),
        unstable_eigenvalues,
        stable_eigenvalues,
    })
}

/// Unit vector in `R^m` from `m - 1` hyperspherical angles.
pub fn sphere_direction(m: usize, angles: &[f64]) -> DVector<f64> {
    assert_eq!(angles.len() + 1, m.max(1));
    let mut v = DVector::zeros(m);
    let mut r = 1.0;
    for (i, &a) in angles.iter().enumerate() {
        v[i] = r * a.cos();
        r *= a.sin();
    }
    v[m - 1] = r;
    v
}

/// The seed `retract(x + radius * U d)` for a unit direction `d` of the
/// unstable frame `U`.
pub fn unstable_seed(
    m: &EmbeddedManifold,
    location: &DVector<f64>,
    frames: &InvariantFrames,
    direction: &DVector<f64>,
    radius: f64,
) -> Result<DVector<f64>> {
    m.retract(&(location + &frames.unstable * direction * radius))
}

/// Quasi-uniform seeds on the sphere of `radius` in the unstable frame.
///
/// One unstable direction gives the two seeds `±`; two give `resolution`
/// points on a circle; higher dimensions use a spiral point set.
pub fn sample_unstable_sphere(
    m: &EmbeddedManifold,
    location: &DVector<f64>,
    frames: &InvariantFrames,
    radius: f64,
    resolution: usize,
) -> Result<Vec<DVector<f64>>> {
    let k = frames.unstable_dim();
    let dirs: Vec<DVector<f64>> = match k {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..resolution)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / resolution as f64;
                sphere_direction(2, &[a])
            })
            .collect(),
        _ => spiral_points(k, resolution),
    };
    dirs.iter()
        .map(|d| unstable_seed(m, location, frames, d, radius))
        .collect()
}

/// Spiral (generalized Fibonacci) points on `S^{k-1}`.
fn spiral_points(k: usize, count: usize) -> Vec<DVector<f64>> {
    let golden = 0.5 * (1.0 + 5f64.sqrt());
    (0..count)
        .map(|i| {
            let u = (i as f64 + 0.5) / count as f64;
            let mut angles = vec![(1.0 - 2.0 * u).acos()];
            for j in 1..k - 1 {
                let a = std::f64::consts::TAU * ((i as f64) * golden.powi(j as i32)).fract();
                angles.push(if j == k - 2 { a } else { a / 2.0 });
            }
            sphere_direction(k, &angles)
        })
        .collect()
}
