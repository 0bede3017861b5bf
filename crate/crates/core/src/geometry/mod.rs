//! Embedded manifolds with the induced metric, circle actions, scalar fields
//! and the projection/retraction toolkit.

mod action;
mod field;
mod manifold;
mod polynomial;
mod validate;

use std::collections::HashSet;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use action::CircleAction;
pub use field::{riemannian_gradient, tangent_hessian, ScalarField, FD_STEP};
pub use manifold::{EmbeddedManifold, FEASIBILITY_TOL, RETRACTION_TOL};
pub use polynomial::Polynomial;
pub use validate::{validate_scenario, Check, ValidationReport};

/// Quasi-uniform manifold sample: an ambient lattice with `per_axis` points
/// per coordinate (random points of the same count beyond four coordinates),
/// retracted onto `m` and thinned to one point per lattice cell.
pub fn seed_cloud(m: &EmbeddedManifold, per_axis: usize) -> Vec<DVector<f64>> {
    let nn = m.ambient_dim();
    let half = 1.05 * m.extent();
    let h = 2.0 * half / per_axis as f64;
    let lattice_dims = nn.min(4);
    let total = per_axis.pow(lattice_dims as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for idx in 0..total {
        let q = if nn <= 4 {
            let mut rest = idx;
            DVector::from_iterator(
                nn,
                (0..nn).map(|k| {
                    let i = rest % per_axis;
                    rest /= per_axis;
                    // Irrational shifts keep lattice points off symmetry planes.
                    -half + (i as f64 + 0.5 + 0.137 * (k as f64 + 1.0).sqrt()) * h
                }),
            )
        } else {
            DVector::from_iterator(nn, (0..nn).map(|_| rng.random_range(-half..half)))
        };
        let Ok(p) = m.retract(&q) else { continue };
        let cell: Vec<i64> = p.iter().map(|v| (v / h).floor() as i64).collect();
        if seen.insert(cell) {
            out.push(p);
        }
    }
    out
}
