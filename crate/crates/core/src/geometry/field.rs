use nalgebra::{DMatrix, DVector};

use super::manifold::EmbeddedManifold;
use super::polynomial::Polynomial;

pub const FD_STEP: f64 = 1e-5;

/// A smooth function on the ambient space, restricted to the manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    poly: Polynomial,
}

impl ScalarField {
    pub fn new(poly: Polynomial) -> Self {
        Self { poly }
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        self.poly.value(p)
    }

    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        self.poly.gradient(p)
    }

    pub fn hessian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        self.poly.hessian(p)
    }

    /// Central-difference ambient gradient with step `h`.
    pub fn fd_gradient(&self, p: &DVector<f64>, h: f64) -> DVector<f64> {
        let n = p.len();
        DVector::from_iterator(
            n,
            (0..n).map(|k| {
                let mut a = p.clone();
                let mut b = p.clone();
                a[k] += h;
                b[k] -= h;
                (self.value(&a) - self.value(&b)) / (2.0 * h)
            }),
        )
    }

    /// `f + amplitude * q`.
    pub fn perturbed(&self, q: &Polynomial, amplitude: f64) -> Self {
        Self::new(self.poly.add(&q.scale(amplitude)))
    }
}

/// Gradient of `f` for the induced metric: tangent projection of the ambient gradient.
pub fn riemannian_gradient(m: &EmbeddedManifold, f: &ScalarField, p: &DVector<f64>) -> DVector<f64> {
    m.tangent_project(p, &f.gradient(p))
}

/// Riemannian Hessian at `p` in an orthonormal tangent basis.
///
/// Uses the Lagrangian form `∇²f - Σ λ_i ∇²c_i` restricted to the tangent
/// space, with `λ` the normal coefficients of `∇f`. Returns `(basis, H)`.
pub fn tangent_hessian(m: &EmbeddedManifold, f: &ScalarField, p: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let basis = m.tangent_basis(p);
    let lam = m.normal_coefficients(p, &f.gradient(p));
    let mut h = f.hessian(p);
    for (c, l) in m.constraints().iter().zip(lam.iter()) {
        h -= c.hessian(p) * *l;
    }
    let ht = basis.transpose() * h * &basis;
    let sym = (&ht + ht.transpose()) * 0.5;
    (basis, sym)
}
