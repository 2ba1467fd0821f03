//! Rational exterior algebra on `dx_1, ..., dx_n`, used as a model of
//! `H^*(T^n; Q)` with the integral lattice `H^*(T^n; Z)` sitting inside it.
//!
//! Integrality of a Chern character is checked two ways: by twisting with
//! line bundles `1 + dx_i dx_j` and pairing against the fundamental class of
//! the torus and its codimension-one subtori, and by a plain scan of the
//! coefficients. The two must agree.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::{binomial, Integer};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohomology::Verdict;
use crate::exact::{format_rat, parse_rat, Rat};

/// Generators are stored as bits of a `u64`, so `n` is bounded.
pub const MAX_GENERATORS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExteriorError {
    #[error("elements live on {0} and {1} generators")]
    Mismatch(usize, usize),
    #[error("at most {MAX_GENERATORS} generators are supported, got {0}")]
    TooManyGenerators(usize),
    #[error("index {index} outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("multi-index {0:?} is not strictly increasing")]
    NotIncreasing(Vec<usize>),
    #[error("exp needs an even element without constant term")]
    NotNilpotentEven,
    #[error("degree vector has length {got}, expected {n}")]
    DegreeLength { got: usize, n: usize },
    #[error("degrees must be positive")]
    NonPositiveDegree,
    #[error("bad coefficient: {0}")]
    Coefficient(String),
}

fn mask_of(indices: &[usize], n: usize) -> Result<u64, ExteriorError> {
    let mut mask = 0u64;
    let mut last = 0;
    for &i in indices {
        if i == 0 || i > n {
            return Err(ExteriorError::IndexOutOfRange { index: i, n });
        }
        if i <= last {
            return Err(ExteriorError::NotIncreasing(indices.to_vec()));
        }
        last = i;
        mask |= 1 << (i - 1);
    }
    Ok(mask)
}

fn indices_of(mask: u64) -> Vec<usize> {
    (0..64)
        .filter(|b| mask >> b & 1 == 1)
        .map(|b| b + 1)
        .collect()
}

/// Sign of `dx_S ∧ dx_T` relative to `dx_{S∪T}` for disjoint `S`, `T`:
/// one transposition per pair `s > t`.
fn shuffle_sign(s: u64, t: u64) -> bool {
    let mut inversions = 0u32;
    let mut rest = t;
    while rest != 0 {
        let b = rest.trailing_zeros();
        inversions += (s >> b >> 1).count_ones();
        rest &= rest - 1;
    }
    inversions % 2 == 1
}

/// Finitely supported `Σ c_I dx_I` with rational coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct ExteriorElement {
    n: usize,
    terms: BTreeMap<u64, Rat>,
}

impl ExteriorElement {
    pub fn zero(n: usize) -> Result<Self, ExteriorError> {
        if n > MAX_GENERATORS {
            return Err(ExteriorError::TooManyGenerators(n));
        }
        Ok(Self {
            n,
            terms: BTreeMap::new(),
        })
    }

    pub fn scalar(n: usize, c: Rat) -> Result<Self, ExteriorError> {
        Self::monomial(n, &[], c)
    }

    pub fn one(n: usize) -> Result<Self, ExteriorError> {
        Self::scalar(n, Rat::one())
    }

    /// `c · dx_{i_1} ∧ ... ∧ dx_{i_k}`; indices 1-based and strictly increasing.
    pub fn monomial(n: usize, indices: &[usize], c: Rat) -> Result<Self, ExteriorError> {
        let mut e = Self::zero(n)?;
        let mask = mask_of(indices, n)?;
        e.add_term(mask, c);
        Ok(e)
    }

    /// `dx_i ∧ dx_j`, the first Chern class of the line bundle `L_ij`.
    pub fn pair(n: usize, i: usize, j: usize) -> Result<Self, ExteriorError> {
        if i < j {
            Self::monomial(n, &[i, j], Rat::one())
        } else {
            Self::monomial(n, &[j, i], -Rat::one())
        }
    }

    pub fn from_terms<'a>(
        n: usize,
        terms: impl IntoIterator<Item = (&'a [usize], Rat)>,
    ) -> Result<Self, ExteriorError> {
        let mut e = Self::zero(n)?;
        for (indices, c) in terms {
            let mask = mask_of(indices, n)?;
            e.add_term(mask, c);
        }
        Ok(e)
    }

    fn add_term(&mut self, mask: u64, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(mask).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&mask);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `dx_I` for an increasing 1-based multi-index.
    pub fn coefficient(&self, indices: &[usize]) -> Result<Rat, ExteriorError> {
        let mask = mask_of(indices, self.n)?;
        Ok(self.terms.get(&mask).cloned().unwrap_or_else(Rat::zero))
    }

    /// Non-zero terms ordered by grade, then lexicographically.
    pub fn terms(&self) -> Vec<(Vec<usize>, Rat)> {
        let mut out: Vec<(Vec<usize>, Rat)> = self
            .terms
            .iter()
            .map(|(&m, c)| (indices_of(m), c.clone()))
            .collect();
        out.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
        out
    }

    /// Part of homogeneous grade `k`.
    pub fn grade(&self, k: usize) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.count_ones() as usize == k)
                .map(|(&m, c)| (m, c.clone()))
                .collect(),
        }
    }

    pub fn is_even(&self) -> bool {
        self.terms.keys().all(|m| m.count_ones() % 2 == 0)
    }

    pub fn add(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (&m, c) in &other.terms {
            out.add_term(m, c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rat) -> Self {
        let mut out = Self {
            n: self.n,
            terms: BTreeMap::new(),
        };
        for (&m, x) in &self.terms {
            out.add_term(m, x * c);
        }
        out
    }

    fn check_same(&self, other: &Self) -> Result<(), ExteriorError> {
        if self.n != other.n {
            return Err(ExteriorError::Mismatch(self.n, other.n));
        }
        Ok(())
    }

    pub fn wedge(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_same(other)?;
        let mut out = Self {
            n: self.n,
            terms: BTreeMap::new(),
        };
        for (&s, a) in &self.terms {
            for (&t, b) in &other.terms {
                if s & t != 0 {
                    continue;
                }
                let c = a * b;
                out.add_term(s | t, if shuffle_sign(s, t) { -c } else { c });
            }
        }
        Ok(out)
    }

    /// `exp(x) = Σ x^k / k!` for an even element with zero constant term;
    /// the series stops because such elements are nilpotent.
    pub fn exp(&self) -> Result<Self, ExteriorError> {
        if !self.is_even() || self.terms.contains_key(&0) {
            return Err(ExteriorError::NotNilpotentEven);
        }
        let mut sum = Self::one(self.n)?;
        let mut power = Self::one(self.n)?;
        let mut k = 0u64;
        loop {
            k += 1;
            power = power
                .wedge(self)?
                .scale(&Rat::new(BigInt::one(), BigInt::from(k)));
            if power.is_zero() {
                return Ok(sum);
            }
            sum = sum.add(&power)?;
        }
    }

    /// Coefficient of `dx_1 ∧ ... ∧ dx_n`.
    pub fn integrate_top(&self) -> Rat {
        let top = if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        };
        self.terms.get(&top).cloned().unwrap_or_else(Rat::zero)
    }

    /// `⟨a, [T^I]⟩`: the integral of the restriction to the subtorus spanned
    /// by the coordinates in `I`, i.e. the coefficient of `dx_I`.
    pub fn subtorus_pairing(&self, indices: &[usize]) -> Result<Rat, ExteriorError> {
        self.coefficient(indices)
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }
}

impl fmt::Debug for ExteriorElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExteriorElement(n={}, {})", self.n, self)
    }
}

impl fmt::Display for ExteriorElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (idx, c)) in self.terms().into_iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", format_rat(&c))?;
            for i in idx {
                write!(f, " dx{i}")?;
            }
        }
        Ok(())
    }
}

/// One evaluation in the twist induction: the subtorus `T^I` and the set of
/// disjoint pairs whose line bundles were tensored in before integrating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Probe {
    pub subtorus: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    #[serde(serialize_with = "ser_rat")]
    pub value: Rat,
}

fn ser_rat<S: serde::Serializer>(x: &Rat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rat(x))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegralityReport {
    pub verdict: Verdict,
    /// First non-integral probe, in the order the induction visits them.
    pub witness: Option<Probe>,
    pub probes_evaluated: usize,
}

/// All sets of pairwise disjoint pairs drawn from `support`, the empty set
/// first, then in lexicographic order of their pair lists.
pub fn disjoint_pair_sets(support: &[usize]) -> Vec<Vec<(usize, usize)>> {
    fn go(
        free: &[usize],
        start: usize,
        cur: &mut Vec<(usize, usize)>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        out.push(cur.clone());
        for a in start..free.len() {
            if used[a] {
                continue;
            }
            for b in a + 1..free.len() {
                if used[b] {
                    continue;
                }
                used[a] = true;
                used[b] = true;
                cur.push((free[a], free[b]));
                go(free, a + 1, cur, used, out);
                cur.pop();
                used[a] = false;
                used[b] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut used = vec![false; support.len()];
    go(support, 0, &mut Vec::new(), &mut used, &mut out);
    out
}

fn twist(n: usize, pairs: &[(usize, usize)]) -> ExteriorElement {
    let mut t = ExteriorElement::one(n).expect("n already validated");
    for &(i, j) in pairs {
        let line = ExteriorElement::one(n)
            .and_then(|one| one.add(&ExteriorElement::pair(n, i, j)?))
            .expect("pair indices lie in range");
        t = t.wedge(&line).expect("same n");
    }
    t
}

/// Integrality by twisting.
///
/// On `T^n` and on each codimension-one subtorus `T^I`, the element is
/// multiplied by `Π (1 + dx_i dx_j)` over every set of disjoint pairs in `I`
/// and paired with `[T^I]`. Each probe is the top coefficient plus a signed
/// sum of lower coefficients, so descending through the pair sets recovers
/// the coefficients of grades `|I|, |I| − 2, ...`; the two subtorus sizes
/// together cover every grade.
pub fn integrality_check(a: &ExteriorElement) -> IntegralityReport {
    let n = a.n();
    let full: Vec<usize> = (1..=n).collect();
    let mut tori = vec![full.clone()];
    for drop in 1..=n {
        tori.push(full.iter().copied().filter(|&i| i != drop).collect());
    }
    let jobs: Vec<(Vec<usize>, Vec<(usize, usize)>)> = tori
        .iter()
        .flat_map(|t| {
            disjoint_pair_sets(t)
                .into_iter()
                .map(move |p| (t.clone(), p))
        })
        .collect();
    let witness = jobs.par_iter().find_map_first(|(torus, pairs)| {
        let value = a
            .wedge(&twist(n, pairs))
            .and_then(|b| b.subtorus_pairing(torus))
            .expect("indices in range");
        (!value.is_integer()).then(|| Probe {
            subtorus: torus.clone(),
            pairs: pairs.clone(),
            value,
        })
    });
    IntegralityReport {
        verdict: if witness.is_none() {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        witness,
        probes_evaluated: jobs.len(),
    }
}

/// Integrality by direct inspection: the first non-integral coefficient.
pub fn coefficient_scan(a: &ExteriorElement) -> Option<(Vec<usize>, Rat)> {
    a.terms().into_iter().find(|(_, c)| !c.is_integer())
}

/// Wedge decomposition of the suspension of `T^n` into spheres:
/// `S(T^n) ≃ ∨_{j=2}^{n+1} (S^j)^{∨ binom(n, j−1)}`.
///
/// The upper limit is `n + 1` so that `n = 2` reproduces
/// `S(S^1 × S^1) = S^2 ∨ S^2 ∨ S^3`; a bound of `n` would drop the top sphere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuspensionSplitting {
    pub n: usize,
    /// `(sphere dimension, count)` in increasing dimension.
    pub multiplicities: Vec<(usize, u64)>,
}

impl SuspensionSplitting {
    pub fn sphere_count(&self) -> u64 {
        self.multiplicities.iter().map(|&(_, c)| c).sum()
    }

    /// `K^0(T^n)` rank: one for the base point plus one per even sphere
    /// `S^j` (since `K̃(S^{j}) = Z` for `j` even, `SX` shifts degree by one).
    pub fn even_k_rank(&self) -> u64 {
        1 + self
            .multiplicities
            .iter()
            .filter(|&&(j, _)| j % 2 == 1)
            .map(|&(_, c)| c)
            .sum::<u64>()
    }

    pub fn odd_k_rank(&self) -> u64 {
        self.multiplicities
            .iter()
            .filter(|&&(j, _)| j % 2 == 0)
            .map(|&(_, c)| c)
            .sum()
    }
}

pub fn suspension_ranks(n: usize) -> SuspensionSplitting {
    assert!(n >= 1, "torus dimension must be positive");
    SuspensionSplitting {
        n,
        multiplicities: (2..=n + 1)
            .map(|j| (j, binomial(n as u64, j as u64 - 1)))
            .collect(),
    }
}

/// Dimension of the even part of the exterior algebra on `n` generators,
/// counted by enumerating subsets.
pub fn even_exterior_dimension(n: usize) -> u64 {
    assert!(n < 32, "subset enumeration limited to n < 32");
    (0u64..1 << n).filter(|m| m.count_ones() % 2 == 0).count() as u64
}

fn check_degrees(a: &ExteriorElement, degrees: &[i64]) -> Result<(), ExteriorError> {
    if degrees.len() != a.n() {
        return Err(ExteriorError::DegreeLength {
            got: degrees.len(),
            n: a.n(),
        });
    }
    if degrees.iter().any(|&d| d < 1) {
        return Err(ExteriorError::NonPositiveDegree);
    }
    Ok(())
}

fn degree_product(mask: u64, degrees: &[i64]) -> BigInt {
    indices_of(mask)
        .iter()
        .map(|&i| BigInt::from(degrees[i - 1]))
        .product()
}

/// Pullback along the covering `(z_1, ..., z_n) ↦ (z_1^{p_1}, ..., z_n^{p_n})`:
/// `dx_i ↦ p_i dx_i`, extended multiplicatively.
pub fn solenoid_pullback(
    a: &ExteriorElement,
    degrees: &[i64],
) -> Result<ExteriorElement, ExteriorError> {
    check_degrees(a, degrees)?;
    let mut out = ExteriorElement::zero(a.n())?;
    for (&m, c) in &a.terms {
        out.add_term(m, c * Rat::from_integer(degree_product(m, degrees)));
    }
    Ok(out)
}

/// The integral element whose pullback is `b`, if there is one. The image of
/// the integral lattice is exactly the elements whose `dx_I` coefficient is
/// an integer divisible by `Π_{i∈I} p_i`.
pub fn solenoid_preimage(
    b: &ExteriorElement,
    degrees: &[i64],
) -> Result<Option<ExteriorElement>, ExteriorError> {
    check_degrees(b, degrees)?;
    let mut out = ExteriorElement::zero(b.n())?;
    for (&m, c) in &b.terms {
        if !c.is_integer() {
            return Ok(None);
        }
        let d = degree_product(m, degrees);
        let (q, r) = c.to_integer().div_rem(&d);
        if !r.is_zero() {
            return Ok(None);
        }
        out.add_term(m, Rat::from_integer(q));
    }
    Ok(Some(out))
}

/// Cumulative degrees `p_i^j` of the `j`-fold cover in a tower with constant
/// per-step degrees.
pub fn tower_degrees(degrees: &[i64], j: u32) -> Vec<i64> {
    degrees.iter().map(|d| d.pow(j)).collect()
}

/// JSON form `{n, terms: [{indices: [..], coeff: "a/b"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub n: usize,
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub indices: Vec<usize>,
    pub coeff: String,
}

impl ElementSpec {
    pub fn to_element(&self) -> Result<ExteriorElement, ExteriorError> {
        let mut e = ExteriorElement::zero(self.n)?;
        for t in &self.terms {
            let c =
                parse_rat(&t.coeff).map_err(|err| ExteriorError::Coefficient(err.to_string()))?;
            e.add_term(mask_of(&t.indices, self.n)?, c);
        }
        Ok(e)
    }

    pub fn from_element(e: &ExteriorElement) -> Self {
        Self {
            n: e.n(),
            terms: e
                .terms()
                .into_iter()
                .map(|(indices, c)| TermSpec {
                    indices,
                    coeff: format_rat(&c),
                })
                .collect(),
        }
    }
}
