use serde::Serialize;

use super::critical::CriticalPoint;
use super::flowlines::MorseDifferential;

/// Outcome of the Morse inequalities for critical counts `c` and Betti numbers `b`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MorseInequalityReport {
    /// `c_k >= b_k` per degree.
    pub weak: Vec<bool>,
    /// `Σ_{i<=k} (-1)^{k-i} c_i >= Σ_{i<=k} (-1)^{k-i} b_i` per degree.
    pub strong: Vec<bool>,
    pub euler_c: i64,
    pub euler_b: i64,
    pub euler_holds: bool,
}

impl MorseInequalityReport {
    pub fn all_hold(&self) -> bool {
        self.weak.iter().all(|&v| v) && self.strong.iter().all(|&v| v) && self.euler_holds
    }
}

pub fn check_morse_inequalities(c: &[usize], b: &[usize]) -> MorseInequalityReport {
    let n = c.len().max(b.len());
    let at = |v: &[usize], k: usize| v.get(k).copied().unwrap_or(0) as i64;
    let weak = (0..n).map(|k| at(c, k) >= at(b, k)).collect();
    let mut strong = Vec::with_capacity(n);
    let (mut sc, mut sb) = (0i64, 0i64);
    for k in 0..n {
        sc = at(c, k) - sc;
        sb = at(b, k) - sb;
        strong.push(sc >= sb);
    }
    let euler = |v: &[usize]| {
        v.iter()
            .enumerate()
            .map(|(k, &x)| if k % 2 == 0 { x as i64 } else { -(x as i64) })
            .sum::<i64>()
    };
    let (euler_c, euler_b) = (euler(c), euler(b));
    MorseInequalityReport {
        weak,
        strong,
        euler_c,
        euler_b,
        euler_holds: euler_c == euler_b,
    }
}

/// Number of critical points of each index `0..=n`.
pub fn critical_counts(crits: &[CriticalPoint], n: usize) -> Vec<usize> {
    (0..=n).map(|l| crits.iter().filter(|c| c.index == l).count()).collect()
}

/// Z2 dimensions of the cohomology of `(CM*, d)` in degrees `0..=n`.
pub fn morse_homology(crits: &[CriticalPoint], d: &MorseDifferential, n: usize) -> Vec<usize> {
    let c = critical_counts(crits, n);
    let rank: Vec<usize> = (0..=n).map(|l| d.matrix(crits, l).rank()).collect();
    (0..=n)
        .map(|l| c[l] - rank[l] - if l > 0 { rank[l - 1] } else { 0 })
        .collect()
}
