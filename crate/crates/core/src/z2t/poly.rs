use std::fmt;
use std::ops::{Add, AddAssign, Mul};

use crate::error::{Error, Result};

/// A polynomial in `T` with coefficients in Z2, stored densely as a bit vector.
///
/// Bit `j` of the storage is the coefficient of `T^j`. The storage is kept
/// trimmed so that the highest stored word is nonzero; equality and hashing are
/// therefore structural.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Z2Poly {
    words: Vec<u64>,
}

impl Z2Poly {
    pub fn zero() -> Self {
        Self { words: Vec::new() }
    }

    pub fn one() -> Self {
        Self::monomial(0)
    }

    /// `T^j`.
    pub fn monomial(j: usize) -> Self {
        let mut words = vec![0u64; j / 64 + 1];
        words[j / 64] = 1u64 << (j % 64);
        Self { words }
    }

    /// Builds a polynomial from coefficient bits, lowest power first.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut p = Self::zero();
        for (j, &b) in bits.iter().enumerate() {
            if b {
                p.flip(j);
            }
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.words.len() == 1 && self.words[0] == 1
    }

    /// Degree of the polynomial, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let top = *self.words.last()?;
        Some((self.words.len() - 1) * 64 + 63 - top.leading_zeros() as usize)
    }

    pub fn coeff(&self, j: usize) -> bool {
        self.words.get(j / 64).is_some_and(|w| (w >> (j % 64)) & 1 == 1)
    }

    /// `Some(j)` when the polynomial is exactly `T^j`.
    pub fn as_monomial(&self) -> Option<usize> {
        let d = self.degree()?;
        let ones: u32 = self.words.iter().map(|w| w.count_ones()).sum();
        (ones == 1).then_some(d)
    }

    /// Exponents with nonzero coefficient, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(i, &w)| (0..64).filter(move |b| (w >> b) & 1 == 1).map(move |b| i * 64 + b))
    }

    fn flip(&mut self, j: usize) {
        if self.words.len() <= j / 64 {
            self.words.resize(j / 64 + 1, 0);
        }
        self.words[j / 64] ^= 1u64 << (j % 64);
        self.trim();
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    /// Multiplication by `T^k`.
    pub fn shl(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let (ws, bs) = (k / 64, k % 64);
        let mut words = vec![0u64; self.words.len() + ws + 1];
        for (i, &w) in self.words.iter().enumerate() {
            words[i + ws] ^= w << bs;
            if bs > 0 {
                words[i + ws + 1] ^= w >> (64 - bs);
            }
        }
        let mut p = Self { words };
        p.trim();
        p
    }

    /// Euclidean division: returns `(q, r)` with `self = q * divisor + r` and
    /// `deg r < deg divisor`.
    pub fn div_rem(&self, divisor: &Z2Poly) -> Result<(Z2Poly, Z2Poly)> {
        let dd = divisor.degree().ok_or(Error::DivisionByZero)?;
        let mut r = self.clone();
        let mut q = Z2Poly::zero();
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            let shift = rd - dd;
            q.flip(shift);
            r += &divisor.shl(shift);
        }
        Ok((q, r))
    }

    pub fn divides(&self, other: &Z2Poly) -> bool {
        if self.is_zero() {
            return other.is_zero();
        }
        other.div_rem(self).is_ok_and(|(_, r)| r.is_zero())
    }

    /// Coefficients as a little-endian bit string (`"01"` is `T`, `""` is zero).
    pub fn to_bitstring(&self) -> String {
        match self.degree() {
            None => String::new(),
            Some(d) => (0..=d).map(|j| if self.coeff(j) { '1' } else { '0' }).collect(),
        }
    }

    pub fn parse_bitstring(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => {
                    return Err(Error::Parse(format!(
                        "invalid character {c:?} at position {i} in coefficient bitstring {s:?}"
                    )))
                }
            }
        }
        Ok(Self::from_bits(&bits))
    }
}

impl AddAssign<&Z2Poly> for Z2Poly {
    fn add_assign(&mut self, rhs: &Z2Poly) {
        if self.words.len() < rhs.words.len() {
            self.words.resize(rhs.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a ^= b;
        }
        self.trim();
    }
}

impl Add for &Z2Poly {
    type Output = Z2Poly;
    fn add(self, rhs: &Z2Poly) -> Z2Poly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for Z2Poly {
    type Output = Z2Poly;
    fn add(mut self, rhs: Z2Poly) -> Z2Poly {
        self += &rhs;
        self
    }
}

impl Mul for &Z2Poly {
    type Output = Z2Poly;
    fn mul(self, rhs: &Z2Poly) -> Z2Poly {
        let mut out = Z2Poly::zero();
        for j in rhs.support() {
            out += &self.shl(j);
        }
        out
    }
}

impl Mul for Z2Poly {
    type Output = Z2Poly;
    fn mul(self, rhs: Z2Poly) -> Z2Poly {
        &self * &rhs
    }
}

impl fmt::Display for Z2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .support()
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .map(|j| match j {
                0 => "1".to_string(),
                1 => "T".to_string(),
                _ => format!("T^{j}"),
            })
            .collect();
        write!(f, "{}", terms.join("+"))
    }
}

impl fmt::Debug for Z2Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z2Poly({self})")
    }
}
