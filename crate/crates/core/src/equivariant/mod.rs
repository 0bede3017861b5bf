//! The equivariant complex `d_{S¹} = d ⊗ 1 + Σ_k R_{2k-1} ⊗ T^k`, its
//! structural checks and its cohomology over Z2[T].

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::morse::{CriticalPoint, MorseDifferential};
use crate::z2t::{homology_dimensions, module_decomposition, BitMatrix, Generator, GradedComplex, PolyMatrix, Z2Poly};

/// Total degree of `x ⊗ T^j`.
pub fn total_degree(x: &CriticalPoint, j: usize) -> usize {
    x.index + 2 * j
}

/// Largest jump order that can occur on an `n`-manifold.
pub fn k_max(n: usize) -> usize {
    n.div_ceil(2)
}

/// Mod-2 jump counts `n_k(x, y)` keyed by `(k, x, y)`.
pub type JumpCounts = BTreeMap<(usize, usize, usize), bool>;

/// `d` together with the jump operators `R_{2k-1}` and the assembled complex.
#[derive(Clone, Debug)]
pub struct EquivariantDifferential {
    pub ids: Vec<String>,
    pub indices: Vec<usize>,
    pub dimension: usize,
    pub k_max: usize,
    /// `operators[k]` maps `(x, y)` to the coefficient of `T^k`; `operators[0]` is `d`.
    pub operators: Vec<BTreeMap<(usize, usize), bool>>,
    pub complex: GradedComplex,
}

impl EquivariantDifferential {
    /// Coefficient of `T^k` in `d_{S¹}(x)` at `y`.
    pub fn coefficient(&self, k: usize, x: usize, y: usize) -> bool {
        self.operators
            .get(k)
            .and_then(|m| m.get(&(x, y)))
            .copied()
            .unwrap_or(false)
    }

    /// Square matrix of the `T^k` coefficient (rows: targets, columns: sources).
    pub fn operator_matrix(&self, k: usize) -> BitMatrix {
        let n = self.ids.len();
        let mut m = BitMatrix::zeros(n, n);
        if let Some(op) = self.operators.get(k) {
            for (&(x, y), &v) in op {
                if v {
                    m.set(y, x, true);
                }
            }
        }
        m
    }
}

/// Assembles `d_{S¹}` over all required pairs; refuses if any count is missing.
pub fn assemble_d_s1(
    crits: &[CriticalPoint],
    dimension: usize,
    d: &MorseDifferential,
    jumps: &JumpCounts,
) -> Result<EquivariantDifferential> {
    let k_max = k_max(dimension);
    let mut operators = vec![BTreeMap::new(); k_max + 1];
    for (x, cx) in crits.iter().enumerate() {
        for (y, cy) in crits.iter().enumerate() {
            if cy.index == cx.index + 1 {
                let v = d.counts.get(&(x, y)).copied().ok_or_else(|| Error::MissingCount {
                    from: cx.id.clone(),
                    to: cy.id.clone(),
                    k: 0,
                })?;
                operators[0].insert((x, y), v);
            }
            for (k, op) in operators.iter_mut().enumerate().skip(1) {
                if cy.index + 2 * k - 1 == cx.index {
                    let v = jumps.get(&(k, x, y)).copied().ok_or_else(|| Error::MissingCount {
                        from: cx.id.clone(),
                        to: cy.id.clone(),
                        k,
                    })?;
                    op.insert((x, y), v);
                }
            }
        }
    }
    let generators = crits
        .iter()
        .map(|c| Generator {
            id: c.id.clone(),
            degree: c.index,
        })
        .collect();
    let mut complex = GradedComplex::new(generators, Some(dimension))?;
    for (k, op) in operators.iter().enumerate() {
        for (&(x, y), &v) in op {
            if v {
                complex.add_to_entry(x, y, &Z2Poly::monomial(k))?;
            }
        }
    }
    Ok(EquivariantDifferential {
        ids: crits.iter().map(|c| c.id.clone()).collect(),
        indices: crits.iter().map(|c| c.index).collect(),
        dimension,
        k_max,
        operators,
        complex,
    })
}

/// A nonzero coefficient of `d_{S¹}²`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SquareEntry {
    pub source: String,
    pub target: String,
    pub power: usize,
}

/// Outcome of squaring `d_{S¹}` over Z2[T].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SquareReport {
    pub zero: bool,
    pub nonzero: Vec<SquareEntry>,
}

pub fn verify_d_squared(e: &EquivariantDifferential) -> SquareReport {
    square_of(&e.complex)
}

/// Every nonzero entry of the square of a complex's differential.
pub fn square_of(c: &GradedComplex) -> SquareReport {
    let n = c.generators().len();
    let mut a = PolyMatrix::zeros(n, n);
    for (s, t, p) in c.entries() {
        a[(t, s)] = p.clone();
    }
    let sq = &a * &a;
    let mut nonzero = Vec::new();
    for s in 0..n {
        for t in 0..n {
            for power in sq[(t, s)].support() {
                nonzero.push(SquareEntry {
                    source: c.generators()[s].id.clone(),
                    target: c.generators()[t].id.clone(),
                    power,
                });
            }
        }
    }
    SquareReport {
        zero: nonzero.is_empty(),
        nonzero,
    }
}

/// `Σ_{i+j=k} R_{2i-1} R_{2j-1} = 0` over Z2, with `R_{-1} = d`.
pub fn per_k_identity(e: &EquivariantDifferential, k: usize) -> bool {
    let n = e.ids.len();
    let mut acc = BitMatrix::zeros(n, n);
    for i in 0..=k {
        acc = acc.add(&e.operator_matrix(i).mul(&e.operator_matrix(k - i)));
    }
    acc.is_zero()
}

/// Cyclic summands of a graded Z2[T]-module, in report form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summands {
    /// Degrees of the free summands `Z2[T]`.
    pub free: Vec<usize>,
    /// `[degree, a]` for each `Z2[T]/(T^a)`.
    pub torsion: Vec<[usize; 2]>,
}

/// Comparison with an expected table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Comparison {
    pub expected: Vec<usize>,
    pub matches: bool,
    /// Degrees where the computed and expected dims differ.
    pub mismatched_degrees: Vec<usize>,
}

/// Equivariant cohomology dims with supporting data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomologyTable {
    pub m_max: usize,
    pub dims: Vec<usize>,
    pub basis_sizes: Vec<usize>,
    /// The dims agree with those from a truncation two degrees deeper.
    pub truncation_stable: bool,
    pub summands: Summands,
    /// `(k, holds)` for `k = 1..=k_max`.
    pub per_k_identities: Vec<(usize, bool)>,
    pub comparison: Option<Comparison>,
}

/// Per-degree dims for `0..=m_max`, module summands and (optionally) a
/// comparison against `expected`.
pub fn equivariant_homology(
    e: &EquivariantDifferential,
    m_max: usize,
    expected: Option<&[usize]>,
) -> Result<HomologyTable> {
    let square = verify_d_squared(e);
    if !square.zero {
        let first = &square.nonzero[0];
        return Err(Error::Structure(format!(
            "d_S1 squared is nonzero ({} -> {} at T^{})",
            first.source, first.target, first.power
        )));
    }
    let t = e.complex.truncate_at(m_max)?;
    let dims = homology_dimensions(&t)?;
    let deeper = homology_dimensions(&e.complex.truncate_at(m_max + 2)?)?;
    let summands = module_decomposition(&e.complex)?;
    let comparison = expected.map(|exp| compare(&dims, exp));
    Ok(HomologyTable {
        m_max,
        truncation_stable: deeper[..=m_max] == dims[..],
        basis_sizes: t.basis_sizes(),
        dims,
        summands: Summands {
            free: summands.free_degrees.clone(),
            torsion: summands.torsion.iter().map(|&(g, a)| [g, a]).collect(),
        },
        per_k_identities: (1..=e.k_max).map(|k| (k, per_k_identity(e, k))).collect(),
        comparison,
    })
}

/// Compares over the common range; a shorter expected table only constrains
/// its own degrees.
pub fn compare(dims: &[usize], expected: &[usize]) -> Comparison {
    let mismatched_degrees: Vec<usize> = (0..dims.len().min(expected.len()))
        .filter(|&m| dims[m] != expected[m])
        .collect();
    Comparison {
        expected: expected.to_vec(),
        matches: mismatched_degrees.is_empty(),
        mismatched_degrees,
    }
}

/// Degree expansion of `H ⊗ Z2[T]`: `Σ_{2j + l = m} b_l` for `m` in `0..=m_max`.
pub fn tensor_expansion(betti: &[usize], m_max: usize) -> Vec<usize> {
    (0..=m_max)
        .map(|m| {
            betti
                .iter()
                .enumerate()
                .filter(|&(l, _)| l <= m && (m - l) % 2 == 0)
                .map(|(_, &b)| b)
                .sum()
        })
        .collect()
}

/// One-jump coefficients on a surface with one minimum `p0`, two saddles
/// `p1`, `q1` and one maximum `p2`: `R1(p1) = a p0`, `R1(q1) = b p0`,
/// `R1(p2) = c p1 + d q1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SurfaceJumpPattern {
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
    /// `(a, b) != 0`, `(c, d) != 0` and `ac + bd = 0`.
    pub holds: bool,
}

pub fn surface_jump_pattern(e: &EquivariantDifferential) -> Option<SurfaceJumpPattern> {
    let of_index = |l: usize| -> Vec<usize> { (0..e.indices.len()).filter(|&i| e.indices[i] == l).collect() };
    let (mins, saddles, maxs) = (of_index(0), of_index(1), of_index(2));
    if e.dimension != 2 || mins.len() != 1 || saddles.len() != 2 || maxs.len() != 1 {
        return None;
    }
    let (p0, p1, q1, p2) = (mins[0], saddles[0], saddles[1], maxs[0]);
    let a = e.coefficient(1, p1, p0);
    let b = e.coefficient(1, q1, p0);
    let c = e.coefficient(1, p2, p1);
    let d = e.coefficient(1, p2, q1);
    Some(SurfaceJumpPattern {
        a,
        b,
        c,
        d,
        holds: (a || b) && (c || d) && !((a && c) ^ (b && d)),
    })
}
