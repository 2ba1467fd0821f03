use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number, always reduced with a positive denominator.
pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse rational from {0:?}")]
pub struct ParseRatError(pub String);

/// Parses `"a/b"`, `"a"` or `"-a/b"`.
pub fn parse_rat(s: &str) -> Result<Rat, ParseRatError> {
    let err = || ParseRatError(s.to_owned());
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| err())?;
    let den = BigInt::from_str(den).map_err(|_| err())?;
    if den.is_zero() {
        return Err(err());
    }
    Ok(Rat::new(num, den))
}

/// Canonical `"a/b"` encoding used in all reports; integers keep the `/1`.
pub fn format_rat(x: &Rat) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn rat_to_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A finitely generated subgroup of Q, held as its canonical generator
/// `g >= 0` with subgroup `gZ`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QSubgroup {
    generator: Rat,
}

impl QSubgroup {
    pub fn trivial() -> Self {
        Self {
            generator: Rat::zero(),
        }
    }

    pub fn integers() -> Self {
        Self {
            generator: Rat::one(),
        }
    }

    pub fn cyclic(g: Rat) -> Self {
        Self { generator: g.abs() }
    }

    pub fn generated_by<'a>(gens: impl IntoIterator<Item = &'a Rat>) -> Self {
        Self {
            generator: qsubgroup_canonical(gens),
        }
    }

    pub fn generator(&self) -> &Rat {
        &self.generator
    }

    pub fn is_trivial(&self) -> bool {
        self.generator.is_zero()
    }

    pub fn contains(&self, x: &Rat) -> bool {
        qsubgroup_contains(x, self)
    }

    /// `self ⊆ other`
    pub fn is_subgroup_of(&self, other: &QSubgroup) -> bool {
        other.contains(&self.generator)
    }

    pub fn join(&self, other: &QSubgroup) -> QSubgroup {
        QSubgroup::generated_by([&self.generator, &other.generator])
    }

    /// `x / g` when `x ∈ gZ`.
    pub fn multiplier_of(&self, x: &Rat) -> Option<BigInt> {
        if self.generator.is_zero() {
            return x.is_zero().then(BigInt::zero);
        }
        let q = x / &self.generator;
        q.is_integer().then(|| q.to_integer())
    }
}

impl fmt::Debug for QSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})Z", self.generator)
    }
}

impl fmt::Display for QSubgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})Z", self.generator)
    }
}

/// Canonical generator of the subgroup of Q generated by `gens`:
/// `gcd(a_i L / b_i) / L` with `L = lcm(b_i)`, and 0 for the empty list.
pub fn qsubgroup_canonical<'a>(gens: impl IntoIterator<Item = &'a Rat>) -> Rat {
    let gens: Vec<&Rat> = gens.into_iter().collect();
    let l = gens.iter().fold(BigInt::one(), |acc, g| acc.lcm(g.denom()));
    let g = gens.iter().fold(BigInt::zero(), |acc, x| {
        acc.gcd(&(x.numer() * (&l / x.denom())))
    });
    Rat::new(g, l)
}

pub fn qsubgroup_contains(x: &Rat, group: &QSubgroup) -> bool {
    if x.is_zero() {
        return true;
    }
    if group.generator.is_zero() {
        return false;
    }
    (x / &group.generator).is_integer()
}

/// Fraction `p/q` with the smallest `q <= q_max` such that `|x - p/q| <= eps`.
pub fn rational_reconstruct(x: f64, eps: f64, q_max: u64) -> Option<Rat> {
    if !x.is_finite() || !(eps > 0.0) || q_max == 0 {
        return None;
    }
    let (num, den) = simplest_in_interval(x - eps, x + eps, q_max)?;
    let candidate = num as f64 / den as f64;
    ((x - candidate).abs() <= eps).then(|| rat(num, den as i64))
}

/// Simplest fraction in `[lo, hi]` by continued-fraction descent; gives up
/// once the denominator exceeds `q_max`.
fn simplest_in_interval(lo: f64, hi: f64, q_max: u64) -> Option<(i64, u64)> {
    // Convergent recurrences h_k = a_k h_{k-1} + h_{k-2}, k_k likewise.
    // Work on lo/hi expanded term by term as long as they share a prefix.
    let (mut lo, mut hi) = (lo, hi);
    let (mut h_prev, mut h) = (0i128, 1i128);
    let (mut k_prev, mut k) = (1i128, 0i128);
    for _ in 0..64 {
        let fl = lo.floor();
        let a = if fl == lo {
            fl
        } else if fl + 1.0 <= hi {
            fl + 1.0
        } else {
            f64::NAN
        };
        if !a.is_nan() {
            let a = a as i128;
            let num = a * h + h_prev;
            let den = a * k + k_prev;
            return (den as u64 <= q_max).then_some((num as i64, den as u64));
        }
        // both endpoints share integer part fl; recurse on reciprocals
        let a = fl as i128;
        let next_h = a * h + h_prev;
        let next_k = a * k + k_prev;
        h_prev = h;
        h = next_h;
        k_prev = k;
        k = next_k;
        if k as u64 > q_max {
            return None;
        }
        let (new_lo, new_hi) = (1.0 / (hi - fl), 1.0 / (lo - fl));
        lo = new_lo;
        hi = new_hi;
    }
    None
}

/// Exact determinant of a square rational matrix by Gaussian elimination.
pub fn rat_determinant(a: &[Vec<Rat>]) -> Rat {
    let n = a.len();
    let mut m: Vec<Vec<Rat>> = a.to_vec();
    let mut det = Rat::one();
    for k in 0..n {
        let Some(piv) = (k..n).find(|&i| !m[i][k].is_zero()) else {
            return Rat::zero();
        };
        if piv != k {
            m.swap(piv, k);
            det = -det;
        }
        let pivot = m[k][k].clone();
        det *= &pivot;
        for i in k + 1..n {
            if m[i][k].is_zero() {
                continue;
            }
            let f = &m[i][k] / &pivot;
            for j in k..n {
                let d = &f * &m[k][j];
                m[i][j] -= d;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_generator_examples() {
        assert_eq!(qsubgroup_canonical(&[rat(1, 2), rat(1, 3)]), rat(1, 6));
        assert_eq!(qsubgroup_canonical(&[]), Rat::zero());
        assert_eq!(qsubgroup_canonical(&[int(5)]), int(5));
        assert_eq!(qsubgroup_canonical(&[int(-4), int(6)]), int(2));
    }

    #[test]
    fn half_third_matches_bounded_search() {
        // brute force: smallest positive value of m/2 + n/3 over |m|,|n| <= 6
        let mut best: Option<Rat> = None;
        for m in -6..=6 {
            for n in -6..=6 {
                let v = rat(m, 2) + rat(n, 3);
                if v > Rat::zero() && best.as_ref().map_or(true, |b| &v < b) {
                    best = Some(v);
                }
            }
        }
        assert_eq!(best.unwrap(), rat(1, 6));
    }

    #[test]
    fn membership_examples() {
        let g = QSubgroup::generated_by(&[rat(1, 2), rat(1, 3)]);
        assert!(g.contains(&rat(5, 6)));
        assert!(!g.contains(&rat(1, 4)));
        assert!(g.contains(&Rat::zero()));
        assert!(QSubgroup::trivial().contains(&Rat::zero()));
        assert!(!QSubgroup::trivial().contains(&rat(1, 7)));
    }

    #[test]
    fn reconstruction_examples() {
        assert_eq!(rational_reconstruct(0.3333, 1e-3, 10), Some(rat(1, 3)));
        assert_eq!(rational_reconstruct(0.5, 1e-12, 10), Some(rat(1, 2)));
        assert_eq!(rational_reconstruct(0.70710678, 1e-4, 10), None);
        assert_eq!(rational_reconstruct(0.0, 1e-9, 10), Some(Rat::zero()));
        assert_eq!(rational_reconstruct(1.0, 1e-9, 1), Some(int(1)));
        assert_eq!(rational_reconstruct(-0.25, 1e-6, 8), Some(rat(-1, 4)));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rat("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rat(" -5 ").unwrap(), int(-5));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
        assert_eq!(format_rat(&int(3)), "3/1");
        assert_eq!(format_rat(&rat(-2, 4)), "-1/2");
    }
}
