use eqmorse::z2t::{
    homology_dimensions, module_decomposition, snf_over_z2t, BitMatrix, Generator, GradedComplex, PolyMatrix, Z2Poly,
};
use proptest::prelude::*;

fn poly(bits: &[bool]) -> Z2Poly {
    Z2Poly::from_bits(bits)
}

fn poly_strategy(max_degree: usize) -> impl Strategy<Value = Z2Poly> {
    prop::collection::vec(any::<bool>(), 0..=max_degree + 1).prop_map(|b| poly(&b))
}

fn matrix_strategy() -> impl Strategy<Value = PolyMatrix> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec(poly_strategy(5), c), r).prop_map(PolyMatrix::from_rows)
    })
}

/// Coefficientwise product over Z2, the schoolbook oracle.
fn naive_mul(a: &Z2Poly, b: &Z2Poly) -> Z2Poly {
    let (Some(da), Some(db)) = (a.degree(), b.degree()) else {
        return Z2Poly::zero();
    };
    let mut bits = vec![false; da + db + 1];
    for i in 0..=da {
        for j in 0..=db {
            bits[i + j] ^= a.coeff(i) && b.coeff(j);
        }
    }
    poly(&bits)
}

/// Rank over Z2 by row reduction of plain byte rows.
fn naive_rank(rows: &[Vec<u8>]) -> usize {
    let mut m: Vec<Vec<u8>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| m[r][c] == 1) else {
            continue;
        };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank && m[r][c] == 1 {
                let pivot = m[rank].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

proptest! {
    #[test]
    fn multiplication_matches_schoolbook(a in poly_strategy(140), b in poly_strategy(140)) {
        prop_assert_eq!(&a * &b, naive_mul(&a, &b));
    }

    #[test]
    fn ring_laws(a in poly_strategy(20), b in poly_strategy(20), c in poly_strategy(20)) {
        prop_assert_eq!(&(&a + &b) * &c, &(&a * &c) + &(&b * &c));
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert!((&a + &a).is_zero());
    }

    #[test]
    fn euclidean_division(a in poly_strategy(30), b in poly_strategy(10)) {
        prop_assume!(!b.is_zero());
        let (q, r) = a.div_rem(&b).unwrap();
        prop_assert_eq!(&(&q * &b) + &r, a);
        prop_assert!(r.degree().is_none_or(|d| d < b.degree().unwrap()));
    }

    #[test]
    fn bitstrings_round_trip(a in poly_strategy(100)) {
        prop_assert_eq!(Z2Poly::parse_bitstring(&a.to_bitstring()).unwrap(), a);
    }

    #[test]
    fn bit_matrix_rank_matches_row_reduction(
        rows in (1usize..12, 1usize..140).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0u8..2, c), r))
    ) {
        prop_assert_eq!(BitMatrix::from_rows(&rows).rank(), naive_rank(&rows));
    }

    #[test]
    fn smith_form_factors_the_matrix(a in matrix_strategy()) {
        let s = snf_over_z2t(&a).unwrap();
        prop_assert_eq!(&(&s.left * &s.diagonal) * &s.right, a.clone());
        prop_assert!(s.diagonal.is_diagonal());
        prop_assert!(s.left.determinant().unwrap().is_one());
        prop_assert!(s.right.determinant().unwrap().is_one());
        let f = s.invariant_factors();
        for w in f.windows(2) {
            prop_assert!(w[0].divides(&w[1]), "{} does not divide {}", w[0], w[1]);
        }
    }
}

/// A random graded complex built as a change of basis of a direct sum of
/// free generators and pairs `x -> T^a y`, with its expected cohomology.
#[derive(Debug, Clone)]
struct Model {
    degrees: Vec<usize>,
    differential: PolyMatrix,
    free: Vec<usize>,
    torsion: Vec<(usize, usize)>,
}

fn model_strategy() -> impl Strategy<Value = Model> {
    let block = prop_oneof![
        (0usize..5).prop_map(|d| (d, None)),
        (0usize..5, 0usize..3).prop_map(|(d, a)| (d, Some(a))),
    ];
    (
        prop::collection::vec(block, 1..6),
        prop::collection::vec(any::<bool>(), 200),
    )
        .prop_map(|(blocks, coins)| {
            let mut degrees = Vec::new();
            let mut pairs = Vec::new();
            let mut free = Vec::new();
            let mut torsion = Vec::new();
            for (d, pair) in blocks {
                match pair {
                    None => {
                        free.push(d);
                        degrees.push(d);
                    }
                    Some(a) => {
                        // d(x) = T^a y with deg x + 1 = deg y + 2a.
                        let dy = if a == 0 { d + 1 } else { d };
                        let y = degrees.len();
                        degrees.push(dy);
                        degrees.push(dy + 2 * a - 1);
                        pairs.push((y + 1, y, a));
                        if a > 0 {
                            torsion.push((dy, a));
                        }
                    }
                }
            }
            let n = degrees.len();
            let mut base = PolyMatrix::zeros(n, n);
            for &(x, y, a) in &pairs {
                base[(y, x)] = Z2Poly::monomial(a);
            }
            let mut p = PolyMatrix::identity(n);
            let mut k = 0;
            for s in 0..n {
                for t in 0..s {
                    let ok = degrees[t] <= degrees[s] && (degrees[s] - degrees[t]) % 2 == 0;
                    if ok && coins[k % coins.len()] {
                        p[(t, s)] = Z2Poly::monomial((degrees[s] - degrees[t]) / 2);
                    }
                    k += 1;
                }
            }
            let mut inv = PolyMatrix::identity(n);
            let mut nil = p.clone();
            for i in 0..n {
                nil[(i, i)] = Z2Poly::zero();
            }
            let mut power = nil.clone();
            for _ in 1..n {
                for i in 0..n {
                    for j in 0..n {
                        let v = &inv[(i, j)] + &power[(i, j)];
                        inv[(i, j)] = v;
                    }
                }
                power = &power * &nil;
            }
            free.sort_unstable();
            torsion.sort_unstable();
            Model {
                degrees,
                differential: &(&inv * &base) * &p,
                free,
                torsion,
            }
        })
}

fn expected_dim(m: &Model, degree: usize) -> usize {
    let free = m.free.iter().filter(|&&g| g <= degree && (degree - g) % 2 == 0).count();
    let tors = m
        .torsion
        .iter()
        .filter(|&&(g, a)| g <= degree && (degree - g) % 2 == 0 && (degree - g) / 2 < a)
        .count();
    free + tors
}

fn complex(m: &Model) -> GradedComplex {
    let gens = m
        .degrees
        .iter()
        .enumerate()
        .map(|(i, &d)| Generator {
            id: format!("g{i}"),
            degree: d,
        })
        .collect();
    let mut c = GradedComplex::new(gens, None).unwrap();
    let n = m.degrees.len();
    for s in 0..n {
        for t in 0..n {
            let p = &m.differential[(t, s)];
            if !p.is_zero() {
                c.set_entry(s, t, p.clone()).unwrap();
            }
        }
    }
    c
}

proptest! {
    #[test]
    fn random_complexes_match_their_decomposition(m in model_strategy()) {
        let c = complex(&m);
        let top = 12;
        let dims = homology_dimensions(&c.truncate_at(top).unwrap()).unwrap();
        for (degree, &d) in dims.iter().enumerate() {
            prop_assert_eq!(d, expected_dim(&m, degree), "degree {}", degree);
        }
        let s = module_decomposition(&c).unwrap();
        prop_assert_eq!(&s.free_degrees, &m.free);
        prop_assert_eq!(&s.torsion, &m.torsion);
    }
}

#[test]
fn smith_form_of_a_known_matrix() {
    let t = Z2Poly::monomial(1);
    let a = PolyMatrix::from_rows(vec![
        vec![t.clone(), Z2Poly::zero()],
        vec![Z2Poly::zero(), Z2Poly::one()],
    ]);
    let f = snf_over_z2t(&a).unwrap().invariant_factors();
    assert_eq!(f, vec![Z2Poly::one(), t]);
}
