use nalgebra::{DMatrix, DVector};

use super::polynomial::Polynomial;
use crate::error::{Error, Result};

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const RETRACTION_TOL: f64 = 1e-12;
const RETRACTION_MAX_ITERS: usize = 50;

/// A closed manifold `{c(x) = 0} ⊂ R^N` cut out by polynomial constraints,
/// carrying the induced metric.
#[derive(Clone, Debug)]
pub struct EmbeddedManifold {
    tag: String,
    ambient_dim: usize,
    constraints: Vec<Polynomial>,
    /// Half-width of an ambient box containing the manifold.
    extent: f64,
}

impl EmbeddedManifold {
    pub fn new(tag: impl Into<String>, ambient_dim: usize, constraints: Vec<Polynomial>, extent: f64) -> Result<Self> {
        if constraints.is_empty() || constraints.len() >= ambient_dim {
            return Err(Error::Precondition(format!(
                "need between 1 and {} constraints in R^{ambient_dim}, got {}",
                ambient_dim.saturating_sub(1),
                constraints.len()
            )));
        }
        if let Some(c) = constraints.iter().find(|c| c.nvars() != ambient_dim) {
            return Err(Error::Precondition(format!(
                "constraint in {} variables, ambient dimension is {ambient_dim}",
                c.nvars()
            )));
        }
        Ok(Self {
            tag: tag.into(),
            ambient_dim,
            constraints,
            extent,
        })
    }

    /// The unit sphere `S^{N-1} ⊂ R^N`.
    pub fn sphere(ambient_dim: usize) -> Self {
        let mut c = Polynomial::constant(ambient_dim, -1.0);
        for i in 0..ambient_dim {
            c = c.add(&Polynomial::coordinate(ambient_dim, i).pow(2));
        }
        let tag = format!("S{}", ambient_dim - 1);
        Self::new(tag, ambient_dim, vec![c], 1.0).expect("valid sphere")
    }

    /// Torus of revolution about the `x1` axis with tube-centre radius `big_r`
    /// and tube radius `small_r`.
    pub fn torus(big_r: f64, small_r: f64) -> Self {
        let x = Polynomial::coordinate(3, 0);
        let y = Polynomial::coordinate(3, 1);
        let z = Polynomial::coordinate(3, 2);
        let rho2 = y.pow(2).add(&z.pow(2));
        let s = x
            .pow(2)
            .add(&rho2)
            .add(&Polynomial::constant(3, big_r * big_r - small_r * small_r));
        let c = s.pow(2).add(&rho2.scale(-4.0 * big_r * big_r));
        Self::new("T2", 3, vec![c], big_r + small_r).expect("valid torus")
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.ambient_dim - self.constraints.len()
    }

    pub fn codim(&self) -> usize {
        self.constraints.len()
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn constraint_values(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.codim(), self.constraints.iter().map(|c| c.value(p)))
    }

    pub fn constraint_norm(&self, p: &DVector<f64>) -> f64 {
        self.constraint_values(p).norm()
    }

    /// Constraint Jacobian, `codim x N`.
    pub fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.codim(), self.ambient_dim);
        for (i, c) in self.constraints.iter().enumerate() {
            j.set_row(i, &c.gradient(p).transpose());
        }
        j
    }

    /// `(J J^T)^{-1} J v`: normal components of `v` in the constraint-gradient basis.
    pub fn normal_coefficients(&self, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let j = self.jacobian(p);
        normal_solve(&j, &(&j * v))
    }

    pub fn tangent_project(&self, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let j = self.jacobian(p);
        let lam = normal_solve(&j, &(&j * v));
        v - j.transpose() * lam
    }

    /// Orthonormal basis of the tangent space at `p`, as columns of an
    /// `N x n` matrix. Built by Gram-Schmidt on projected coordinate vectors.
    pub fn tangent_basis(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let n = self.intrinsic_dim();
        let nn = self.ambient_dim;
        let j = self.jacobian(p);
        let mut candidates: Vec<DVector<f64>> = (0..nn)
            .map(|i| {
                let mut e = DVector::zeros(nn);
                e[i] = 1.0;
                let lam = normal_solve(&j, &(&j * &e));
                e - j.transpose() * lam
            })
            .collect();
        // Longest projections first keeps the process well conditioned.
        let mut order: Vec<usize> = (0..nn).collect();
        order.sort_by(|&a, &b| candidates[b].norm().total_cmp(&candidates[a].norm()));
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
        for i in order {
            let mut v = std::mem::replace(&mut candidates[i], DVector::zeros(0));
            for _ in 0..2 {
                for b in &basis {
                    let d = b.dot(&v);
                    v -= b * d;
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                basis.push(v / norm);
            }
            if basis.len() == n {
                break;
            }
        }
        DMatrix::from_columns(&basis)
    }

    /// Smallest singular value of the constraint Jacobian at `p`.
    pub fn jacobian_min_singular(&self, p: &DVector<f64>) -> f64 {
        let j = self.jacobian(p);
        j.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Newton projection onto the constraint set with minimal-norm steps.
    pub fn retract(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let mut p = q.clone();
        let mut c = self.constraint_values(&p);
        let mut cn = c.norm();
        for _ in 0..RETRACTION_MAX_ITERS {
            if cn < RETRACTION_TOL * 0.1 {
                return Ok(p);
            }
            let j = self.jacobian(&p);
            let step = j.transpose() * normal_solve(&j, &c);
            if !step.iter().all(|v| v.is_finite()) {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..8 {
                let cand = &p - &step * alpha;
                let cc = self.constraint_values(&cand);
                let ccn = cc.norm();
                if ccn < cn || ccn < RETRACTION_TOL * 0.1 {
                    p = cand;
                    c = cc;
                    cn = ccn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if cn < RETRACTION_TOL {
            Ok(p)
        } else {
            Err(Error::RetractionDivergence {
                point: q.iter().copied().collect(),
                residual: cn,
            })
        }
    }
}

/// Solves `(J J^T) x = b` for a full-row-rank `J`.
fn normal_solve(j: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let g = j * j.transpose();
    if g.nrows() == 1 {
        return b / g[(0, 0)];
    }
    g.cholesky()
        .map(|ch| ch.solve(b))
        .unwrap_or_else(|| DVector::from_element(b.len(), f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn sphere_radial_projection() {
        let s2 = EmbeddedManifold::sphere(3);
        let p = s2.retract(&v(&[0.0, 0.0, 1.1])).unwrap();
        assert!((p - v(&[0.0, 0.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn circle_projection() {
        let s1 = EmbeddedManifold::sphere(2);
        let p = s1.retract(&v(&[2.0, 0.0])).unwrap();
        assert!((p - v(&[1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn torus_projection_matches_closed_form() {
        let t = EmbeddedManifold::torus(2.0, 1.0);
        // Outer equator point in the (x2, x3) plane, scaled by 1.01.
        let dir = v(&[0.0, 0.6, 0.8]);
        let q = &dir * 3.03;
        let p = t.retract(&q).unwrap();
        assert!(t.constraint_norm(&p) < RETRACTION_TOL);
        // Closed form: radial distance from the tube circle is corrected along
        // the outward normal, which here is the direction itself.
        assert!((p - &dir * 3.0).norm() < 1e-12);
    }

    #[test]
    fn retraction_fixed_point() {
        let t = EmbeddedManifold::torus(2.0, 1.0);
        let p = v(&[1.0, 2.0, 0.0]);
        assert!(t.constraint_norm(&p) < 1e-14);
        assert!((t.retract(&p).unwrap() - p).norm() < 1e-15);
    }

    #[test]
    fn retraction_divergence_reported() {
        let s2 = EmbeddedManifold::sphere(3);
        assert!(matches!(
            s2.retract(&v(&[0.0, 0.0, 0.0])),
            Err(Error::RetractionDivergence { .. })
        ));
    }

    #[test]
    fn tangent_projection_cases() {
        let s2 = EmbeddedManifold::sphere(3);
        let north = v(&[0.0, 0.0, 1.0]);
        assert!(s2.tangent_project(&north, &v(&[0.0, 0.0, 1.0])).norm() < 1e-15);
        assert!((s2.tangent_project(&north, &v(&[1.0, 0.0, 0.0])) - v(&[1.0, 0.0, 0.0])).norm() < 1e-15);
        let s1 = EmbeddedManifold::sphere(2);
        let t = s1.tangent_project(&v(&[1.0, 0.0]), &v(&[1.0, 1.0]));
        assert!((t - v(&[0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn tangent_basis_is_orthonormal_and_tangent() {
        let t = EmbeddedManifold::torus(2.0, 1.0);
        let p = t.retract(&v(&[0.7, 1.5, -1.9])).unwrap();
        let b = t.tangent_basis(&p);
        assert_eq!(b.ncols(), 2);
        let gram = b.transpose() * &b;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((t.jacobian(&p) * &b).norm() < 1e-10);
    }
}
