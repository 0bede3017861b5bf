use std::ops::Mul;

use super::complex::{homology_dimensions, GradedComplex};
use super::poly::Z2Poly;
use crate::error::{Error, Result};

/// Dense matrix over Z2[T].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Z2Poly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Z2Poly::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Z2Poly::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Z2Poly>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Z2Poly::is_zero)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)].is_zero()))
    }

    pub fn diagonal(&self) -> Vec<Z2Poly> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].clone()).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    /// `row[dst] += q * row[src]`.
    fn add_row_multiple(&mut self, src: usize, dst: usize, q: &Z2Poly) {
        for j in 0..self.cols {
            let t = q * &self[(src, j)];
            self[(dst, j)] += &t;
        }
    }

    /// `col[dst] += q * col[src]`.
    fn add_col_multiple(&mut self, src: usize, dst: usize, q: &Z2Poly) {
        for i in 0..self.rows {
            let t = q * &self[(i, src)];
            self[(i, dst)] += &t;
        }
    }

    /// Determinant by Euclidean row reduction to upper-triangular form.
    /// Row swaps and row additions do not change the determinant in
    /// characteristic 2.
    pub fn determinant(&self) -> Result<Z2Poly> {
        if self.rows != self.cols {
            return Err(Error::Structure("determinant of a non-square matrix".into()));
        }
        let mut m = self.clone();
        let n = self.rows;
        let mut det = Z2Poly::one();
        for c in 0..n {
            loop {
                let pivot = (c..n)
                    .filter(|&r| !m[(r, c)].is_zero())
                    .min_by_key(|&r| (m[(r, c)].degree(), r));
                let Some(p) = pivot else {
                    return Ok(Z2Poly::zero());
                };
                m.swap_rows(p, c);
                let mut done = true;
                for r in c + 1..n {
                    if m[(r, c)].is_zero() {
                        continue;
                    }
                    let (q, rem) = m[(r, c)].div_rem(&m[(c, c)])?;
                    m.add_row_multiple(c, r, &q);
                    if !rem.is_zero() {
                        done = false;
                    }
                }
                if done {
                    break;
                }
            }
            det = &det * &m[(c, c)];
        }
        Ok(det)
    }
}

impl std::ops::Index<(usize, usize)> for PolyMatrix {
    type Output = Z2Poly;
    fn index(&self, (i, j): (usize, usize)) -> &Z2Poly {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for PolyMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Z2Poly {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &PolyMatrix {
    type Output = PolyMatrix;
    fn mul(self, rhs: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in PolyMatrix::mul");
        let mut out = PolyMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let t = a * &rhs[(k, j)];
                    out[(i, j)] += &t;
                }
            }
        }
        out
    }
}

/// `A = U * D * V` with `U`, `V` invertible over Z2[T] and `D` diagonal with
/// each diagonal entry dividing the next.
#[derive(Clone, Debug)]
pub struct SmithForm {
    pub left: PolyMatrix,
    pub diagonal: PolyMatrix,
    pub right: PolyMatrix,
}

impl SmithForm {
    pub fn invariant_factors(&self) -> Vec<Z2Poly> {
        self.diagonal.diagonal()
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors().iter().filter(|p| !p.is_zero()).count()
    }
}

/// Smith normal form by Euclidean row/column reduction.
///
/// The pivot is the nonzero entry of minimal degree in the remaining block,
/// ties broken by lowest `(row, col)`.
pub fn snf_over_z2t(a: &PolyMatrix) -> Result<SmithForm> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut d = a.clone();
    // a = u * d * v is maintained throughout. Every elementary operation used
    // here is an involution in characteristic 2.
    let mut u = PolyMatrix::identity(rows);
    let mut v = PolyMatrix::identity(cols);
    let mut t = 0;
    while t < rows.min(cols) {
        let pivot = (t..rows)
            .flat_map(|i| (t..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| !d[(i, j)].is_zero())
            .min_by_key(|&(i, j)| (d[(i, j)].degree(), i, j));
        let Some((pi, pj)) = pivot else { break };
        d.swap_rows(pi, t);
        u.swap_cols(pi, t);
        d.swap_cols(pj, t);
        v.swap_rows(pj, t);

        let mut clean = true;
        for i in t + 1..rows {
            if d[(i, t)].is_zero() {
                continue;
            }
            let (q, r) = d[(i, t)].div_rem(&d[(t, t)])?;
            d.add_row_multiple(t, i, &q);
            u.add_col_multiple(i, t, &q);
            clean &= r.is_zero();
        }
        for j in t + 1..cols {
            if d[(t, j)].is_zero() {
                continue;
            }
            let (q, r) = d[(t, j)].div_rem(&d[(t, t)])?;
            d.add_col_multiple(t, j, &q);
            v.add_row_multiple(j, t, &q);
            clean &= r.is_zero();
        }
        if !clean {
            // A remainder of smaller degree appeared; pick a new pivot.
            continue;
        }
        // Divisibility: the pivot must divide every remaining entry.
        let offender = (t + 1..rows)
            .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
            .find(|&(i, j)| !d[(t, t)].divides(&d[(i, j)]));
        if let Some((i, _)) = offender {
            d.add_row_multiple(i, t, &Z2Poly::one());
            u.add_col_multiple(t, i, &Z2Poly::one());
            continue;
        }
        t += 1;
    }
    Ok(SmithForm {
        left: u,
        diagonal: d,
        right: v,
    })
}

/// Decomposition of a graded Z2[T]-module into cyclic summands.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModuleSummands {
    /// Degrees of the free summands `Z2[T]` (sorted).
    pub free_degrees: Vec<usize>,
    /// `(degree, a)` for each summand `Z2[T]/(T^a)` generated in `degree` (sorted).
    pub torsion: Vec<(usize, usize)>,
}

impl ModuleSummands {
    pub fn free_rank(&self) -> usize {
        self.free_degrees.len()
    }

    /// Z2-dimension of the module in total degree `m`.
    pub fn dimension_at(&self, m: usize) -> usize {
        let free = self
            .free_degrees
            .iter()
            .filter(|&&g| g <= m && (m - g) % 2 == 0)
            .count();
        let tors = self
            .torsion
            .iter()
            .filter(|&&(g, a)| g <= m && (m - g) % 2 == 0 && (m - g) / 2 < a)
            .count();
        free + tors
    }
}

/// Presents the cohomology of a graded complex as a Z2[T]-module.
///
/// Torsion exponents and their degrees come from the Smith form of the
/// differential; free-summand degrees from the Hilbert function once the
/// torsion contribution is removed.
pub fn module_decomposition(c: &GradedComplex) -> Result<ModuleSummands> {
    let n = c.generators().len();
    let mut a = PolyMatrix::zeros(n, n);
    for (s, t, p) in c.entries() {
        a[(t, s)] = p.clone();
    }
    let sq = &a * &a;
    if !sq.is_zero() {
        return Err(Error::Structure("differential does not square to zero".into()));
    }
    let snf = snf_over_z2t(&a)?;
    let mut torsion = Vec::new();
    for (i, f) in snf.invariant_factors().iter().enumerate() {
        if f.is_zero() {
            continue;
        }
        let exponent = f
            .as_monomial()
            .ok_or_else(|| Error::Structure(format!("non-monomial invariant factor {f} in a graded complex")))?;
        if exponent == 0 {
            continue;
        }
        let (r, p) = (0..n)
            .map(|r| (r, &snf.left[(r, i)]))
            .find(|(_, p)| !p.is_zero())
            .expect("column of an invertible matrix is nonzero");
        let shift = p.degree().expect("nonzero");
        torsion.push((c.generators()[r].degree + 2 * shift, exponent));
    }
    torsion.sort_unstable();

    let top = c.max_generator_degree() + 1;
    let dims = homology_dimensions(&c.truncate_at(top)?)?;
    let tors_only = ModuleSummands {
        free_degrees: Vec::new(),
        torsion: torsion.clone(),
    };
    let mut free_degrees = Vec::new();
    let free_count = |m: usize| dims[m] - tors_only.dimension_at(m);
    for m in 0..=top {
        let below = if m >= 2 { free_count(m - 2) } else { 0 };
        let here = free_count(m);
        free_degrees.extend(std::iter::repeat_n(m, here - below));
    }
    Ok(ModuleSummands { free_degrees, torsion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::z2t::complex::Generator;

    fn p(bits: &str) -> Z2Poly {
        Z2Poly::parse_bitstring(bits).unwrap()
    }

    fn check(a: &PolyMatrix) -> SmithForm {
        let s = snf_over_z2t(a).unwrap();
        assert_eq!(&(&s.left * &s.diagonal) * &s.right, *a);
        assert!(s.diagonal.is_diagonal());
        assert!(s.left.determinant().unwrap().is_one());
        assert!(s.right.determinant().unwrap().is_one());
        let f = s.invariant_factors();
        for w in f.windows(2) {
            assert!(w[0].divides(&w[1]), "{} does not divide {}", w[0], w[1]);
        }
        s
    }

    #[test]
    fn single_t() {
        let s = check(&PolyMatrix::from_rows(vec![vec![p("01")]]));
        assert_eq!(s.invariant_factors(), vec![p("01")]);
    }

    #[test]
    fn rank_one_two_by_two() {
        // [[1, T], [T, T^2]]: second row is T times the first.
        let a = PolyMatrix::from_rows(vec![vec![p("1"), p("01")], vec![p("01"), p("001")]]);
        let s = check(&a);
        assert_eq!(s.invariant_factors(), vec![p("1"), Z2Poly::zero()]);
    }

    #[test]
    fn identity_three() {
        let s = check(&PolyMatrix::identity(3));
        assert_eq!(s.invariant_factors(), vec![Z2Poly::one(); 3]);
    }

    #[test]
    fn divisibility_fix_up() {
        // diag(T, T+1) has invariant factors 1, T(T+1).
        let a = PolyMatrix::from_rows(vec![vec![p("01"), Z2Poly::zero()], vec![Z2Poly::zero(), p("11")]]);
        let s = check(&a);
        assert_eq!(s.invariant_factors(), vec![p("1"), p("011")]);
    }

    #[test]
    fn determinant_values() {
        let a = PolyMatrix::from_rows(vec![vec![p("01"), p("1")], vec![p("1"), p("01")]]);
        // T*T + 1
        assert_eq!(a.determinant().unwrap(), p("101"));
    }

    fn complex(gens: &[(&str, usize)], entries: &[(usize, usize, usize)]) -> GradedComplex {
        let g = gens
            .iter()
            .map(|&(id, degree)| Generator { id: id.into(), degree })
            .collect();
        let mut c = GradedComplex::new(g, None).unwrap();
        for &(s, t, j) in entries {
            c.set_entry(s, t, Z2Poly::monomial(j)).unwrap();
        }
        c
    }

    #[test]
    fn sphere_rotation_is_free() {
        let c = complex(&[("s", 0), ("n", 2)], &[]);
        let m = module_decomposition(&c).unwrap();
        assert_eq!(m.free_degrees, vec![0, 2]);
        assert!(m.torsion.is_empty());
    }

    #[test]
    fn circle_weight_one_is_torsion() {
        let c = complex(&[("min", 0), ("max", 1)], &[(1, 0, 1)]);
        let m = module_decomposition(&c).unwrap();
        assert_eq!(m.free_rank(), 0);
        assert_eq!(m.torsion, vec![(0, 1)]);
    }

    #[test]
    fn circle_weight_two_is_free() {
        let c = complex(&[("min", 0), ("max", 1)], &[]);
        let m = module_decomposition(&c).unwrap();
        assert_eq!(m.free_degrees, vec![0, 1]);
    }

    #[test]
    fn hopf_sphere_torsion_exponent_two() {
        let c = complex(&[("min", 0), ("max", 3)], &[(1, 0, 2)]);
        let m = module_decomposition(&c).unwrap();
        assert_eq!(m.torsion, vec![(0, 2)]);
        assert_eq!(
            (0..6).map(|d| m.dimension_at(d)).collect::<Vec<_>>(),
            vec![1, 0, 1, 0, 0, 0]
        );
    }
}
