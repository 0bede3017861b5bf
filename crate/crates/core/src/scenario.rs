//! Scenario configuration documents and the built-in catalog.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::equivariant::tensor_expansion;
use crate::error::{Error, Result};
use crate::geometry::{CircleAction, EmbeddedManifold, Polynomial, ScalarField};
use crate::jump::SolverSettings;

/// A scenario document. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub m_max: usize,
    #[serde(default)]
    pub seed: u64,
    pub manifold: ManifoldSpec,
    pub action: ActionSpec,
    pub function: FunctionSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<ExpectedSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ManifoldSpec {
    /// Unit sphere in `R^ambient_dim`.
    Sphere { ambient_dim: usize },
    /// Torus of revolution about the `x1` axis.
    Torus { major_radius: f64, minor_radius: f64 },
    /// Common zero set of polynomial constraints; `extent` bounds every coordinate.
    Custom {
        ambient_dim: usize,
        constraints: Vec<String>,
        extent: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActionSpec {
    Trivial,
    /// Rotation of the coordinate plane `(plane[0], plane[1])` (1-based) with the given weight.
    Rotation {
        plane: [usize; 2],
        weight: i64,
    },
    /// Diagonal action on `R^4 = C^2`.
    Hopf,
    /// Skew-symmetric generator `A` (row-major); `σ_s = exp(sA)`.
    Generator {
        rows: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<i64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    /// Polynomial in the ambient coordinates `x1..xN`.
    pub expression: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    /// Coefficient scale of the random polynomial added on retry.
    pub amplitude: f64,
    /// Number of perturbed retries after a failed computation.
    pub retries: usize,
    /// Perturb from the first attempt on.
    pub always: bool,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            amplitude: 1e-3,
            retries: 3,
            always: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSpec {
    /// Equivariant cohomology dims in degrees `0, 1, 2, ...`.
    pub dims: Vec<usize>,
}

impl ExpectedSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(text, &e))
    }
}

fn config_error(text: &str, e: &toml::de::Error) -> Error {
    let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((0, 0));
    Error::Config {
        line,
        column,
        message: e.message().to_string(),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(text, &e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs serialize")
    }

    pub fn settings(&self) -> SolverSettings {
        self.solver.clone().unwrap_or_default()
    }

    pub fn manifold(&self) -> Result<EmbeddedManifold> {
        match &self.manifold {
            ManifoldSpec::Sphere { ambient_dim } => {
                if *ambient_dim < 2 {
                    return Err(Error::Structure("sphere needs ambient_dim >= 2".into()));
                }
                Ok(EmbeddedManifold::sphere(*ambient_dim))
            }
            ManifoldSpec::Torus {
                major_radius,
                minor_radius,
            } => {
                if !(major_radius > minor_radius && *minor_radius > 0.0) {
                    return Err(Error::Structure("torus needs major_radius > minor_radius > 0".into()));
                }
                Ok(EmbeddedManifold::torus(*major_radius, *minor_radius))
            }
            ManifoldSpec::Custom {
                ambient_dim,
                constraints,
                extent,
            } => {
                let polys = constraints
                    .iter()
                    .map(|c| Polynomial::parse(c, *ambient_dim))
                    .collect::<Result<Vec<_>>>()?;
                EmbeddedManifold::new("custom", *ambient_dim, polys, *extent)
            }
        }
    }

    pub fn action(&self, ambient_dim: usize) -> Result<CircleAction> {
        match &self.action {
            ActionSpec::Trivial => Ok(CircleAction::trivial(ambient_dim)),
            ActionSpec::Rotation { plane, weight } => {
                let [i, j] = *plane;
                if i == 0 || j == 0 || i > ambient_dim || j > ambient_dim || i == j {
                    return Err(Error::Structure(format!(
                        "rotation plane {plane:?} is not a pair of distinct coordinates in 1..={ambient_dim}"
                    )));
                }
                Ok(CircleAction::plane_rotation(ambient_dim, i - 1, j - 1, *weight))
            }
            ActionSpec::Hopf => {
                if ambient_dim != 4 {
                    return Err(Error::Structure("the Hopf action needs ambient_dim = 4".into()));
                }
                Ok(CircleAction::hopf())
            }
            ActionSpec::Generator { rows, weight } => {
                if rows.len() != ambient_dim || rows.iter().any(|r| r.len() != ambient_dim) {
                    return Err(Error::Structure(format!(
                        "generator must be {ambient_dim} x {ambient_dim}"
                    )));
                }
                let a = DMatrix::from_fn(ambient_dim, ambient_dim, |i, j| rows[i][j]);
                Ok(CircleAction::new(a, *weight))
            }
        }
    }

    pub fn function(&self, ambient_dim: usize) -> Result<ScalarField> {
        Ok(ScalarField::new(Polynomial::parse(
            &self.function.expression,
            ambient_dim,
        )?))
    }

    pub fn expected_dims(&self) -> Option<&[usize]> {
        self.expected.as_ref().map(|e| e.dims.as_slice())
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

const TORUS_FUNCTION: &str = "x3 + 0.25*x1 + 0.1*x1*x2";
const S3_FUNCTION: &str = "x1 + 0.3*(x1*x3 + 0.7*x2*x4 + 0.3*x3^2)";

fn builtin(
    id: &str,
    description: &str,
    m_max: usize,
    manifold: ManifoldSpec,
    action: ActionSpec,
    expression: &str,
    expected: Option<Vec<usize>>,
) -> ScenarioConfig {
    ScenarioConfig {
        id: id.to_string(),
        description: Some(description.to_string()),
        m_max,
        seed: 0,
        manifold,
        action,
        function: FunctionSpec {
            expression: expression.to_string(),
        },
        perturbation: PerturbationSpec::default(),
        solver: None,
        expected: expected.map(|dims| ExpectedSpec { dims }),
    }
}

/// The built-in catalog, each with its expected table.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    let circle = || ManifoldSpec::Sphere { ambient_dim: 2 };
    let sphere = || ManifoldSpec::Sphere { ambient_dim: 3 };
    let torus = || ManifoldSpec::Torus {
        major_radius: 2.0,
        minor_radius: 1.0,
    };
    let s3 = || ManifoldSpec::Sphere { ambient_dim: 4 };
    let rot = |i, j, w| ActionSpec::Rotation {
        plane: [i, j],
        weight: w,
    };
    let point = |m: usize| {
        let mut v = vec![0; m + 1];
        v[0] = 1;
        v
    };
    let mut out = vec![
        builtin(
            "circle-w1",
            "unit circle, rotation of weight 1 (free)",
            8,
            circle(),
            rot(1, 2, 1),
            "x1",
            Some(point(8)),
        ),
        builtin(
            "circle-w2",
            "unit circle, rotation of weight 2 (isotropy Z2)",
            8,
            circle(),
            rot(1, 2, 2),
            "x1",
            Some(vec![1; 9]),
        ),
        builtin(
            "circle-w3",
            "unit circle, rotation of weight 3 (isotropy Z3)",
            8,
            circle(),
            rot(1, 2, 3),
            "x1",
            Some(point(8)),
        ),
        builtin(
            "sphere-rot",
            "unit 2-sphere, rotation about the x3 axis",
            8,
            sphere(),
            rot(1, 2, 1),
            "x3",
            Some(vec![1, 0, 2, 0, 2, 0, 2, 0, 2]),
        ),
        builtin(
            "torus-rot",
            "torus of revolution (R = 2, r = 1), free rotation along the tube circle",
            5,
            torus(),
            rot(2, 3, 1),
            TORUS_FUNCTION,
            Some(vec![1, 1, 0, 0, 0, 0]),
        ),
        builtin(
            "s3-hopf",
            "unit 3-sphere, Hopf action, perturbed height",
            5,
            s3(),
            ActionSpec::Hopf,
            S3_FUNCTION,
            Some(vec![1, 0, 1, 0, 0, 0]),
        ),
    ];
    let mut symmetric = builtin(
        "s3-hopf-symmetric",
        "unit 3-sphere, Hopf action, unperturbed height (non-transversal)",
        5,
        s3(),
        ActionSpec::Hopf,
        "x1",
        Some(vec![1, 0, 1, 0, 0, 0]),
    );
    symmetric.perturbation.retries = 0;
    out.push(symmetric);
    for (id, manifold, expression, betti, m_max) in [
        ("circle-trivial", circle(), "x1", vec![1, 1], 8),
        ("sphere-trivial", sphere(), "x3", vec![1, 0, 1], 8),
        ("torus-trivial", torus(), TORUS_FUNCTION, vec![1, 2, 1], 8),
        ("s3-trivial", s3(), "x1", vec![1, 0, 0, 1], 5),
    ] {
        out.push(builtin(
            id,
            "trivial action: H(M) tensor Z2[T]",
            m_max,
            manifold,
            ActionSpec::Trivial,
            expression,
            Some(tensor_expansion(&betti, m_max)),
        ));
    }
    out
}

pub fn find_builtin(id: &str) -> Option<ScenarioConfig> {
    builtin_scenarios().into_iter().find(|c| c.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_ids_are_unique() {
        let all = builtin_scenarios();
        let mut ids: Vec<&str> = all.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), all.len());
    }

    #[test]
    fn every_builtin_round_trips() {
        for c in builtin_scenarios() {
            let text = c.to_toml();
            let back = ScenarioConfig::from_toml(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_toml(), text);
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_position() {
        let mut text = find_builtin("circle-w1").unwrap().to_toml();
        text.push_str("\nbogus = 1\n");
        match ScenarioConfig::from_toml(&text) {
            Err(Error::Config { line, .. }) => assert!(line > 1),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn builtins_build() {
        for c in builtin_scenarios() {
            let m = c.manifold().unwrap();
            c.action(m.ambient_dim()).unwrap();
            c.function(m.ambient_dim()).unwrap();
        }
    }
}
