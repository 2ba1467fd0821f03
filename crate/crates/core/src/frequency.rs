//! The magnetic frequency group `Σ_I Pf(Θ_I) Z_I[μ]` over even index sets
//! `I ⊆ {1..p}`, and membership queries for candidate gap labels.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::exact::{pfaffian, QSubgroup, Rat};
use crate::odometer::{level_module, z_i_mu_of_module, ChainError, SubgroupChain};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrequencyError {
    #[error("magnetic matrix is not square")]
    NotSquare,
    #[error("magnetic matrix is not skew-symmetric at ({0}, {1})")]
    NotSkew(usize, usize),
    #[error("magnetic matrix has dimension {theta}, chain has dimension {chain}")]
    DimensionMismatch { theta: usize, chain: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Rational skew-symmetric `p × p` matrix `Θ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MagneticMatrix {
    entries: Vec<Vec<Rat>>,
}

impl MagneticMatrix {
    pub fn new(entries: Vec<Vec<Rat>>) -> Result<Self, FrequencyError> {
        let p = entries.len();
        if entries.iter().any(|r| r.len() != p) {
            return Err(FrequencyError::NotSquare);
        }
        for i in 0..p {
            for j in i..p {
                if entries[i][j] != -entries[j][i].clone() {
                    return Err(FrequencyError::NotSkew(i, j));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn zero(p: usize) -> Self {
        Self {
            entries: vec![vec![Rat::zero(); p]; p],
        }
    }

    /// Builds `Θ` from its strictly upper triangle, row-major.
    pub fn from_upper(p: usize, upper: &[Rat]) -> Self {
        assert_eq!(
            upper.len(),
            p * p.saturating_sub(1) / 2,
            "upper triangle length"
        );
        let mut m = Self::zero(p);
        let mut it = upper.iter();
        for i in 0..p {
            for j in i + 1..p {
                let v = it.next().expect("length checked").clone();
                m.entries[i][j] = v.clone();
                m.entries[j][i] = -v;
            }
        }
        m
    }

    /// Two-dimensional field with `θ_12 = theta`.
    pub fn planar(theta: Rat) -> Self {
        Self::from_upper(2, &[theta])
    }

    pub fn p(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rat {
        &self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rat>] {
        &self.entries
    }

    pub fn upper(&self) -> Vec<Rat> {
        let p = self.p();
        (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[i][j].clone())
            .collect()
    }

    /// `Θ_I`: rows and columns of `I` in increasing order.
    pub fn submatrix(&self, subset: &[usize]) -> Vec<Vec<Rat>> {
        subset
            .iter()
            .map(|&i| subset.iter().map(|&j| self.entries[i][j].clone()).collect())
            .collect()
    }

    /// `Pf(Θ_I)`, with `Pf(Θ_∅) = 1`.
    pub fn pfaffian_of(&self, subset: &[usize]) -> Rat {
        pfaffian(&self.submatrix(subset)).expect("even principal submatrix of a skew matrix")
    }

    pub fn scaled(&self, factor: &Rat) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|r| r.iter().map(|x| x * factor).collect())
                .collect(),
        }
    }

    /// `P Θ P^T` for the coordinate permutation `i ↦ perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = self.p();
        let mut out = Self::zero(p);
        for i in 0..p {
            for j in 0..p {
                out.entries[perm[i]][perm[j]] = self.entries[i][j].clone();
            }
        }
        out
    }
}

/// Even-sized increasing multi-indices of `0..p`, `∅` included, in
/// lexicographic order.
pub fn even_subsets(p: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u32..1 << p)
        .filter(|m| m.count_ones() % 2 == 0)
        .map(|m| (0..p).filter(|&i| m >> i & 1 == 1).collect())
        .collect();
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contribution {
    /// 0-based indices.
    pub subset: Vec<usize>,
    pub pfaffian: Rat,
    pub z_i_mu: QSubgroup,
}

impl Contribution {
    /// Canonical generator of `Pf(Θ_I) Z_I[μ]`.
    pub fn generator(&self) -> Rat {
        (&self.pfaffian * self.z_i_mu.generator()).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyGroup {
    pub p: usize,
    pub level: usize,
    pub contributions: Vec<Contribution>,
    pub total: QSubgroup,
}

pub fn frequency_group(
    theta: &MagneticMatrix,
    chain: &SubgroupChain,
    level: usize,
) -> Result<FrequencyGroup, FrequencyError> {
    if theta.p() != chain.p() {
        return Err(FrequencyError::DimensionMismatch {
            theta: theta.p(),
            chain: chain.p(),
        });
    }
    let module = level_module(chain, level)?;
    let contributions: Vec<Contribution> = even_subsets(theta.p())
        .into_iter()
        .map(|subset| {
            let pf = theta.pfaffian_of(&subset);
            let z = z_i_mu_of_module(&module, &subset);
            Contribution {
                subset,
                pfaffian: pf,
                z_i_mu: z,
            }
        })
        .collect();
    let gens: Vec<Rat> = contributions.iter().map(Contribution::generator).collect();
    Ok(FrequencyGroup {
        p: theta.p(),
        level,
        total: QSubgroup::generated_by(&gens),
        contributions,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MembershipVerdict {
    Member { level: usize },
    NotFoundUpTo { max_level: usize },
}

/// One summand `m_I · Pf(Θ_I) · g_I` of a decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionTerm {
    pub subset: Vec<usize>,
    pub multiplier: BigInt,
    pub pfaffian: Rat,
    pub z_i_mu_generator: Rat,
}

impl DecompositionTerm {
    pub fn value(&self) -> Rat {
        Rat::from_integer(self.multiplier.clone()) * &self.pfaffian * &self.z_i_mu_generator
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    pub label: Rat,
    pub verdict: MembershipVerdict,
    /// Empty unless the verdict is `Member`.
    pub decomposition: Vec<DecompositionTerm>,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self.verdict, MembershipVerdict::Member { .. })
    }
}

/// Scans levels `1..=max_level` for the first frequency group containing
/// `x`. A miss is reported relative to `max_level` only.
pub fn label_membership(
    x: &Rat,
    theta: &MagneticMatrix,
    chain: &SubgroupChain,
    max_level: usize,
) -> Result<Membership, FrequencyError> {
    let max_level = max_level.min(chain.depth());
    for level in 1..=max_level {
        let group = frequency_group(theta, chain, level)?;
        if let Some(decomposition) = decompose(x, &group) {
            return Ok(Membership {
                label: x.clone(),
                verdict: MembershipVerdict::Member { level },
                decomposition,
            });
        }
    }
    Ok(Membership {
        label: x.clone(),
        verdict: MembershipVerdict::NotFoundUpTo { max_level },
        decomposition: Vec::new(),
    })
}

/// Integer multipliers `m_I` with `x = Σ m_I Pf(Θ_I) g_I`, if any.
pub fn decompose(x: &Rat, group: &FrequencyGroup) -> Option<Vec<DecompositionTerm>> {
    if !group.total.contains(x) {
        return None;
    }
    let terms: Vec<Rat> = group
        .contributions
        .iter()
        .map(|c| &c.pfaffian * c.z_i_mu.generator())
        .collect();
    let denom = terms
        .iter()
        .chain(std::iter::once(x))
        .fold(BigInt::one(), |acc, t| acc.lcm(t.denom()));
    let scaled: Vec<BigInt> = terms
        .iter()
        .map(|t| (t * Rat::from_integer(denom.clone())).to_integer())
        .collect();
    let target = (x * Rat::from_integer(denom)).to_integer();
    let (g, bezout) = extended_gcd_all(&scaled);
    let multipliers: Vec<BigInt> = if target.is_zero() {
        vec![BigInt::zero(); scaled.len()]
    } else {
        let factor = &target / &g;
        bezout.into_iter().map(|b| b * &factor).collect()
    };
    Some(
        group
            .contributions
            .iter()
            .zip(multipliers)
            .map(|(c, m)| DecompositionTerm {
                subset: c.subset.clone(),
                multiplier: m,
                pfaffian: c.pfaffian.clone(),
                z_i_mu_generator: c.z_i_mu.generator().clone(),
            })
            .collect(),
    )
}

/// `(g, c)` with `g = gcd(values) >= 0` and `Σ c_k values_k = g`.
fn extended_gcd_all(values: &[BigInt]) -> (BigInt, Vec<BigInt>) {
    let mut g = BigInt::zero();
    let mut coeffs: Vec<BigInt> = Vec::with_capacity(values.len());
    for v in values {
        if v.is_zero() {
            coeffs.push(BigInt::zero());
            continue;
        }
        let e = g.extended_gcd(v);
        for c in coeffs.iter_mut() {
            *c *= &e.x;
        }
        coeffs.push(e.y);
        g = e.gcd;
    }
    if g.is_negative() {
        g = -g;
        for c in coeffs.iter_mut() {
            *c = -c.clone();
        }
    }
    (g, coeffs)
}

/// Formal frequency group for a `Θ` whose Pfaffians are treated as
/// independent symbols: the label `Σ_I a_I Pf(Θ_I)` is a member iff every
/// `a_I ∈ Z_I[μ]`. No statement over the reals is made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicFrequencyGroup {
    pub p: usize,
    pub level: usize,
    pub terms: Vec<(Vec<usize>, QSubgroup)>,
}

pub fn symbolic_frequency_group(
    chain: &SubgroupChain,
    level: usize,
) -> Result<SymbolicFrequencyGroup, FrequencyError> {
    let module = level_module(chain, level)?;
    let terms = even_subsets(chain.p())
        .into_iter()
        .map(|s| {
            let z = z_i_mu_of_module(&module, &s);
            (s, z)
        })
        .collect();
    Ok(SymbolicFrequencyGroup {
        p: chain.p(),
        level,
        terms,
    })
}

impl SymbolicFrequencyGroup {
    /// `coefficients[I] = a_I`; missing subsets count as zero, subsets that
    /// are not even index sets are never members.
    pub fn contains(&self, coefficients: &BTreeMap<Vec<usize>, Rat>) -> bool {
        coefficients.iter().all(|(subset, a)| {
            a.is_zero()
                || self
                    .terms
                    .iter()
                    .find(|(s, _)| s == subset)
                    .is_some_and(|(_, z)| z.contains(a))
        })
    }
}
