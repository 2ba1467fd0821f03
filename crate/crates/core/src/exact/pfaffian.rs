use std::collections::HashMap;

use num_traits::{One, Zero};

use super::Rat;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PfaffianError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("pfaffian of odd dimension {0}")]
    OddDimension(usize),
    #[error("matrix is not skew-symmetric at ({0}, {1})")]
    NotSkew(usize, usize),
}

/// Largest size handled by memoized row expansion.
const EXPANSION_LIMIT: usize = 8;

/// Pfaffian of a skew-symmetric rational matrix given as rows.
///
/// `Pf` of the empty matrix is 1. Sizes up to 8 use expansion along the
/// first row with memoization over the remaining index set; larger sizes use
/// skew-symmetric elimination over Q.
pub fn pfaffian(a: &[Vec<Rat>]) -> Result<Rat, PfaffianError> {
    check_skew(a)?;
    if a.len() <= EXPANSION_LIMIT {
        Ok(pfaffian_expansion(a))
    } else {
        Ok(pfaffian_elimination(a))
    }
}

fn check_skew(a: &[Vec<Rat>]) -> Result<(), PfaffianError> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(PfaffianError::NotSquare);
    }
    for i in 0..n {
        for j in i..n {
            if a[i][j] != -a[j][i].clone() {
                return Err(PfaffianError::NotSkew(i, j));
            }
        }
    }
    if n % 2 == 1 {
        return Err(PfaffianError::OddDimension(n));
    }
    Ok(())
}

/// `Pf(A) = Σ_{j>0} (-1)^{j+1} a_{0j} Pf(A with rows/cols 0, j removed)`,
/// indices taken within the remaining set.
pub(crate) fn pfaffian_expansion(a: &[Vec<Rat>]) -> Rat {
    fn go(a: &[Vec<Rat>], remaining: u32, memo: &mut HashMap<u32, Rat>) -> Rat {
        if remaining == 0 {
            return Rat::one();
        }
        if let Some(v) = memo.get(&remaining) {
            return v.clone();
        }
        let first = remaining.trailing_zeros() as usize;
        let rest = remaining & !(1 << first);
        let mut total = Rat::zero();
        let mut sign_positive = true;
        let mut bits = rest;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let entry = &a[first][j];
            if !entry.is_zero() {
                let minor = go(a, rest & !(1 << j), memo);
                let term = entry * minor;
                if sign_positive {
                    total += term;
                } else {
                    total -= term;
                }
            }
            sign_positive = !sign_positive;
        }
        memo.insert(remaining, total.clone());
        total
    }
    let n = a.len();
    assert!(n < 32);
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    go(a, full, &mut HashMap::new())
}

/// Skew-symmetric elimination: bring a nonzero entry to (0,1) by a
/// congruence swap, clear rows/columns 2.. against rows 0 and 1, recurse on
/// the trailing block. Each swap flips the sign.
pub(crate) fn pfaffian_elimination(a: &[Vec<Rat>]) -> Rat {
    let mut m: Vec<Vec<Rat>> = a.to_vec();
    let mut n = m.len();
    let mut result = Rat::one();
    let mut offset = 0;
    while n > 0 {
        let o = offset;
        let Some(k) = (o + 1..o + n).find(|&k| !m[o][k].is_zero()) else {
            return Rat::zero();
        };
        if k != o + 1 {
            swap_sym(&mut m, o + 1, k);
            result = -result;
        }
        let pivot = m[o][o + 1].clone();
        result *= &pivot;
        // row_i -= (a_{0i}/a_{01}) row_1 ... and symmetric, for i >= 2,
        // plus row_i -= (a_{1i}/a_{10}) row_0
        for i in o + 2..o + n {
            let f1 = &m[o][i] / &pivot; // multiple of row/col o+1 to clear (o, i)
            let f0 = &m[o + 1][i] / &pivot; // multiple of row/col o to clear (o+1, i)
            if !f1.is_zero() {
                add_sym(&mut m, i, o + 1, &-f1.clone());
            }
            if !f0.is_zero() {
                add_sym(&mut m, i, o, &f0);
            }
        }
        offset += 2;
        n -= 2;
    }
    result
}

fn swap_sym(m: &mut [Vec<Rat>], a: usize, b: usize) {
    m.swap(a, b);
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

/// row_t += f row_s; col_t += f col_s (a congruence, so Pf is unchanged)
fn add_sym(m: &mut [Vec<Rat>], t: usize, s: usize, f: &Rat) {
    let n = m.len();
    for j in 0..n {
        let d = f * &m[s][j];
        m[t][j] += d;
    }
    for i in 0..n {
        let d = f * &m[i][s];
        m[i][t] += d;
    }
}
