use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::bitmatrix::BitMatrix;
use super::poly::Z2Poly;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub id: String,
    /// Base degree (the Morse index of the underlying critical point).
    pub degree: usize,
}

/// A free graded Z2[T]-module on a finite generator set together with a
/// differential of total degree +1, where `deg T = 2`.
///
/// `entries[(x, y)] = p` means `d(x)` contains `p(T) * y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedComplex {
    generators: Vec<Generator>,
    entries: BTreeMap<(usize, usize), Z2Poly>,
    /// Dimension of the underlying manifold, when known. Entries `T^j` with
    /// `2j - 1 > dimension` are rejected.
    dimension: Option<usize>,
}

/// Per-degree Z2 matrices of a graded complex, for degrees `0..=m_max`.
#[derive(Clone, Debug)]
pub struct TruncatedComplex {
    pub m_max: usize,
    /// `bases[m]` lists `(generator, j)` with `degree(generator) + 2j = m`, for `m` in `0..=m_max+1`.
    pub bases: Vec<Vec<(usize, usize)>>,
    /// `maps[m]` has `bases[m+1].len()` rows and `bases[m].len()` columns.
    pub maps: Vec<BitMatrix>,
}

impl GradedComplex {
    /// Creates a complex with no differential. Generator ids must be unique.
    pub fn new(generators: Vec<Generator>, dimension: Option<usize>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, g) in generators.iter().enumerate() {
            if let Some(j) = seen.insert(g.id.clone(), i) {
                return Err(Error::Structure(format!(
                    "duplicate generator id {:?} (positions {j} and {i})",
                    g.id
                )));
            }
        }
        Ok(Self {
            generators,
            entries: BTreeMap::new(),
            dimension,
        })
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn entry(&self, source: usize, target: usize) -> Z2Poly {
        self.entries.get(&(source, target)).cloned().unwrap_or_default()
    }

    /// Nonzero entries ordered by `(source, target)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Z2Poly)> {
        self.entries.iter().map(|(&(s, t), p)| (s, t, p))
    }

    /// Sets an entry after checking degree homogeneity. A zero coefficient
    /// removes the entry.
    pub fn set_entry(&mut self, source: usize, target: usize, coeff: Z2Poly) -> Result<()> {
        if source >= self.generators.len() || target >= self.generators.len() {
            return Err(Error::Structure(format!(
                "entry ({source}, {target}) refers to a missing generator"
            )));
        }
        self.check_entry(source, target, &coeff)?;
        if coeff.is_zero() {
            self.entries.remove(&(source, target));
        } else {
            self.entries.insert((source, target), coeff);
        }
        Ok(())
    }

    /// Adds `coeff` to an entry (characteristic 2).
    pub fn add_to_entry(&mut self, source: usize, target: usize, coeff: &Z2Poly) -> Result<()> {
        let sum = &self.entry(source, target) + coeff;
        self.set_entry(source, target, sum)
    }

    fn check_entry(&self, source: usize, target: usize, coeff: &Z2Poly) -> Result<()> {
        let ls = self.generators[source].degree;
        let lt = self.generators[target].degree;
        for j in coeff.support() {
            if lt + 2 * j != ls + 1 {
                return Err(Error::Homogeneity {
                    from: self.generators[source].id.clone(),
                    target: self.generators[target].id.clone(),
                    power: j,
                });
            }
            if let Some(n) = self.dimension {
                if j >= 1 && 2 * j - 1 > n {
                    return Err(Error::Structure(format!(
                        "entry {} -> {} carries T^{j} beyond the manifold dimension {n}",
                        self.generators[source].id, self.generators[target].id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Re-checks homogeneity of every entry.
    pub fn validate(&self) -> Result<()> {
        for (&(s, t), p) in &self.entries {
            self.check_entry(s, t, p)?;
        }
        Ok(())
    }

    pub fn max_generator_degree(&self) -> usize {
        self.generators.iter().map(|g| g.degree).max().unwrap_or(0)
    }

    /// Per-degree Z2 matrices for total degrees `0..=m_max`.
    pub fn truncate_at(&self, m_max: usize) -> Result<TruncatedComplex> {
        self.validate()?;
        let bases: Vec<Vec<(usize, usize)>> = (0..=m_max + 1)
            .map(|m| {
                self.generators
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| g.degree <= m && (m - g.degree) % 2 == 0)
                    .map(|(i, g)| (i, (m - g.degree) / 2))
                    .collect()
            })
            .collect();
        let mut maps = Vec::with_capacity(m_max + 1);
        for m in 0..=m_max {
            let src = &bases[m];
            let dst = &bases[m + 1];
            let pos: HashMap<(usize, usize), usize> = dst.iter().enumerate().map(|(r, &b)| (b, r)).collect();
            let mut mat = BitMatrix::zeros(dst.len(), src.len());
            for (c, &(x, jx)) in src.iter().enumerate() {
                for (&(s, t), p) in self.entries.range((x, 0)..(x + 1, 0)) {
                    debug_assert_eq!(s, x);
                    for j in p.support() {
                        if let Some(&r) = pos.get(&(t, jx + j)) {
                            mat.toggle(r, c);
                        }
                    }
                }
            }
            maps.push(mat);
        }
        Ok(TruncatedComplex { m_max, bases, maps })
    }

    pub fn to_document(&self) -> ComplexDocument {
        ComplexDocument {
            dimension: self.dimension,
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorRecord {
                    id: g.id.clone(),
                    index: g.degree,
                })
                .collect(),
            entries: self
                .entries
                .iter()
                .map(|(&(s, t), p)| EntryRecord {
                    source: self.generators[s].id.clone(),
                    target: self.generators[t].id.clone(),
                    coefficient: p.to_bitstring(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &ComplexDocument) -> Result<Self> {
        let generators = doc
            .generators
            .iter()
            .map(|g| Generator {
                id: g.id.clone(),
                degree: g.index,
            })
            .collect();
        let mut c = Self::new(generators, doc.dimension)?;
        for e in &doc.entries {
            let s = c
                .index_of(&e.source)
                .ok_or_else(|| Error::Structure(format!("unknown generator {:?}", e.source)))?;
            let t = c
                .index_of(&e.target)
                .ok_or_else(|| Error::Structure(format!("unknown generator {:?}", e.target)))?;
            let p = Z2Poly::parse_bitstring(&e.coefficient)?;
            c.add_to_entry(s, t, &p)?;
        }
        Ok(c)
    }

    /// Structured-text (TOML) form: generator list and entry list with
    /// little-endian coefficient bitstrings.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("complex document serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ComplexDocument = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_document(&doc)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub generators: Vec<GeneratorRecord>,
    #[serde(default)]
    pub entries: Vec<EntryRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub id: String,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryRecord {
    pub source: String,
    pub target: String,
    pub coefficient: String,
}

impl TruncatedComplex {
    pub fn basis_sizes(&self) -> Vec<usize> {
        self.bases[..=self.m_max].iter().map(Vec::len).collect()
    }

    /// First degree `m` where `maps[m] * maps[m-1]` is nonzero.
    pub fn first_composition_failure(&self) -> Option<usize> {
        (1..=self.m_max).find(|&m| !self.maps[m].mul(&self.maps[m - 1]).is_zero())
    }
}

/// `dim H^m = size_m - rank d_m - rank d_{m-1}` for `m` in `0..=m_max`.
pub fn homology_dimensions(t: &TruncatedComplex) -> Result<Vec<usize>> {
    if let Some(m) = t.first_composition_failure() {
        return Err(Error::NotAComplex { degree: m });
    }
    let ranks: Vec<usize> = t.maps.iter().map(BitMatrix::rank).collect();
    Ok((0..=t.m_max)
        .map(|m| {
            let incoming = if m == 0 { 0 } else { ranks[m - 1] };
            t.bases[m].len() - ranks[m] - incoming
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gens(spec: &[(&str, usize)]) -> Vec<Generator> {
        spec.iter()
            .map(|&(id, degree)| Generator {
                id: id.to_string(),
                degree,
            })
            .collect()
    }

    pub(crate) fn circle(weight_odd: bool) -> GradedComplex {
        let mut c = GradedComplex::new(gens(&[("min", 0), ("max", 1)]), Some(1)).unwrap();
        if weight_odd {
            c.set_entry(1, 0, Z2Poly::monomial(1)).unwrap();
        }
        c
    }

    #[test]
    fn zero_differential_basis_sizes() {
        let c = GradedComplex::new(gens(&[("s", 0), ("n", 2)]), Some(2)).unwrap();
        let t = c.truncate_at(4).unwrap();
        assert_eq!(t.basis_sizes(), vec![1, 0, 2, 0, 2]);
        assert!(t.maps.iter().all(BitMatrix::is_zero));
        assert_eq!(homology_dimensions(&t).unwrap(), vec![1, 0, 2, 0, 2]);
    }

    #[test]
    fn circle_degree_one_block() {
        let t = circle(true).truncate_at(4).unwrap();
        // degree 1 basis: max; degree 2 basis: min*T
        assert_eq!(t.bases[1], vec![(1, 0)]);
        assert_eq!(t.bases[2], vec![(0, 1)]);
        assert_eq!(t.maps[1], BitMatrix::from_rows(&[vec![1]]));
        assert_eq!(homology_dimensions(&t).unwrap(), vec![1, 0, 0, 0, 0]);
    }

    #[test]
    fn circle_even_weight_dims() {
        let t = circle(false).truncate_at(6).unwrap();
        assert_eq!(homology_dimensions(&t).unwrap(), vec![1; 7]);
    }

    #[test]
    fn torus_trivial_sizes() {
        let c = GradedComplex::new(gens(&[("b", 0), ("s1", 1), ("s2", 1), ("t", 2)]), Some(2)).unwrap();
        assert_eq!(c.truncate_at(3).unwrap().basis_sizes(), vec![1, 2, 2, 2]);
    }

    #[test]
    fn homogeneity_violation_names_entry() {
        let mut c = circle(false);
        let err = c.set_entry(1, 0, Z2Poly::one()).unwrap_err();
        match err {
            Error::Homogeneity { from, target, power } => {
                assert_eq!((from.as_str(), target.as_str(), power), ("max", "min", 0));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn entries_beyond_dimension_rejected() {
        let mut c = GradedComplex::new(gens(&[("a", 0), ("b", 3)]), Some(3)).unwrap();
        assert!(c.set_entry(1, 0, Z2Poly::monomial(2)).is_ok());
        let mut c = GradedComplex::new(gens(&[("a", 0), ("b", 3)]), Some(2)).unwrap();
        assert!(c.set_entry(1, 0, Z2Poly::monomial(2)).is_err());
    }

    #[test]
    fn non_complex_detected() {
        // d(a) = b, d(b) = c at T^0 is not a complex.
        let mut c = GradedComplex::new(gens(&[("a", 0), ("b", 1), ("c", 2)]), None).unwrap();
        c.set_entry(0, 1, Z2Poly::one()).unwrap();
        c.set_entry(1, 2, Z2Poly::one()).unwrap();
        let t = c.truncate_at(3).unwrap();
        assert!(matches!(homology_dimensions(&t), Err(Error::NotAComplex { degree: 1 })));
    }

    #[test]
    fn toml_round_trip_is_bit_exact() {
        let c = circle(true);
        let text = c.to_toml();
        let back = GradedComplex::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
        assert!(text.contains("coefficient = \"01\""));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "bogus = 1\n";
        assert!(GradedComplex::from_toml(text).is_err());
    }
}
