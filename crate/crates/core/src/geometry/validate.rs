use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::action::CircleAction;
use super::field::{ScalarField, FD_STEP};
use super::manifold::{EmbeddedManifold, FEASIBILITY_TOL};
use super::seed_cloud;

const GROUP_LAW_TOL: f64 = 1e-10;
const ISOMETRY_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of [`validate_scenario`]: one entry per structural check.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    fn push(&mut self, name: &str, worst: f64, tol: f64, what: &str) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: worst < tol,
            detail: format!("worst {what} {worst:.3e} (tolerance {tol:.0e})"),
        });
    }
}

/// Checks the manifold, the action and the function on a deterministic
/// sample of manifold points.
pub fn validate_scenario(m: &EmbeddedManifold, a: &CircleAction, f: &ScalarField) -> ValidationReport {
    let mut report = ValidationReport::default();
    let points: Vec<DVector<f64>> = seed_cloud(m, 6).into_iter().take(64).collect();
    let angles = [0.3, 1.1, 2.5, 4.0, 5.9];

    if points.is_empty() {
        report.checks.push(Check {
            name: "sampling".into(),
            passed: false,
            detail: "no feasible sample points found".into(),
        });
        return report;
    }

    let min_sv = points
        .iter()
        .map(|p| m.jacobian_min_singular(p))
        .fold(f64::INFINITY, f64::min);
    report.checks.push(Check {
        name: "constraint-rank".into(),
        passed: min_sv > RANK_TOL,
        detail: format!(
            "smallest Jacobian singular value {min_sv:.3e} over {} points",
            points.len()
        ),
    });

    let worst_fixed = points
        .iter()
        .map(|p| m.retract(p).map(|q| (q - p).norm()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    report.push("retraction-fixed-point", worst_fixed, 1e-10, "displacement");

    let mut worst_feas: f64 = 0.0;
    for p in &points {
        for &s in &angles {
            worst_feas = worst_feas.max(m.constraint_norm(&(a.matrix(s) * p)));
        }
    }
    report.push("action-feasibility", worst_feas, FEASIBILITY_TOL, "constraint value");

    let nn = m.ambient_dim();
    let mut worst_group = (a.matrix(0.0) - DMatrix::identity(nn, nn)).norm();
    for &s in &angles {
        for &t in &angles {
            let lhs = a.matrix(s + t);
            let rhs = a.matrix(s) * a.matrix(t);
            worst_group = worst_group.max((lhs - rhs).norm());
        }
    }
    report.push("group-law", worst_group, GROUP_LAW_TOL, "deviation");

    let mut worst_iso: f64 = 0.0;
    for &s in &angles {
        let o = a.matrix(s);
        worst_iso = worst_iso.max((o.transpose() * &o - DMatrix::identity(nn, nn)).norm());
    }
    report.push("isometry", worst_iso, ISOMETRY_TOL, "orthogonality defect");

    let mut worst_grad: f64 = 0.0;
    for p in &points {
        let g = f.gradient(p);
        let err = (f.fd_gradient(p, FD_STEP) - &g).norm() / g.norm().max(1.0);
        worst_grad = worst_grad.max(err);
    }
    report.push("gradient-consistency", worst_grad, 1e-6, "relative error");

    report
}
