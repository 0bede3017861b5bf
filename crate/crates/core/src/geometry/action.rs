use nalgebra::{DMatrix, DVector};

use super::manifold::EmbeddedManifold;
use crate::error::Result;

/// A circle action `σ_s = exp(s A)` given by an ambient generator `A`.
///
/// For a skew-symmetric `A` preserving the constraints this is an isometric
/// action of `R / 2πZ` (when `exp(2πA) = I`).
#[derive(Clone, Debug)]
pub struct CircleAction {
    generator: DMatrix<f64>,
    weight: Option<i64>,
}

impl CircleAction {
    pub fn new(generator: DMatrix<f64>, weight: Option<i64>) -> Self {
        assert!(generator.is_square(), "circle-action generator must be square");
        Self { generator, weight }
    }

    pub fn trivial(ambient_dim: usize) -> Self {
        Self::new(DMatrix::zeros(ambient_dim, ambient_dim), Some(0))
    }

    /// Rotation by `weight * s` in the `(i, j)` coordinate plane.
    pub fn plane_rotation(ambient_dim: usize, i: usize, j: usize, weight: i64) -> Self {
        let mut a = DMatrix::zeros(ambient_dim, ambient_dim);
        a[(i, j)] = -(weight as f64);
        a[(j, i)] = weight as f64;
        Self::new(a, Some(weight))
    }

    /// The Hopf action `(z1, z2) -> (e^{is} z1, e^{is} z2)` on `C^2 = R^4`.
    pub fn hopf() -> Self {
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 1)] = -1.0;
        a[(1, 0)] = 1.0;
        a[(2, 3)] = -1.0;
        a[(3, 2)] = 1.0;
        Self::new(a, Some(1))
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn weight(&self) -> Option<i64> {
        self.weight
    }

    pub fn is_trivial(&self) -> bool {
        self.generator.iter().all(|&v| v == 0.0)
    }

    /// The ambient matrix `exp(s A)`.
    pub fn matrix(&self, s: f64) -> DMatrix<f64> {
        if self.is_trivial() {
            return DMatrix::identity(self.generator.nrows(), self.generator.ncols());
        }
        (&self.generator * s).exp()
    }

    /// `σ_s(p)`: the ambient linear map followed by retraction.
    pub fn act(&self, m: &EmbeddedManifold, s: f64, p: &DVector<f64>) -> Result<DVector<f64>> {
        if self.is_trivial() {
            return Ok(p.clone());
        }
        m.retract(&(self.matrix(s) * p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn circle_weights() {
        let s1 = EmbeddedManifold::sphere(2);
        let w1 = CircleAction::plane_rotation(2, 0, 1, 1);
        let p = w1.act(&s1, PI, &v(&[1.0, 0.0])).unwrap();
        assert!((p - v(&[-1.0, 0.0])).norm() < 1e-14);
        let w2 = CircleAction::plane_rotation(2, 0, 1, 2);
        let p = w2.act(&s1, PI / 2.0, &v(&[1.0, 0.0])).unwrap();
        assert!((p - v(&[-1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn hopf_orbit() {
        let s3 = EmbeddedManifold::sphere(4);
        let h = CircleAction::hopf();
        let s = 0.7;
        let p = h.act(&s3, s, &v(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((p - v(&[s.cos(), s.sin(), 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn group_law() {
        let h = CircleAction::hopf();
        let lhs = h.matrix(0.4 + 1.9);
        let rhs = h.matrix(0.4) * h.matrix(1.9);
        assert!((lhs - rhs).norm() < 1e-12);
        assert!((h.matrix(0.0) - DMatrix::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn trivial_action_is_identity() {
        let s2 = EmbeddedManifold::sphere(3);
        let a = CircleAction::trivial(3);
        let p = v(&[0.0, 0.6, 0.8]);
        assert_eq!(a.act(&s2, 1.234, &p).unwrap(), p);
    }
}
