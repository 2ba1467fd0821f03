//! Finite-level model of the odometer `Σ = lim Z^p/Γ_j`.
//!
//! Every clopen set and every locally constant integer function lives at a
//! finite level `j`, where `Σ` is replaced by the finite group
//! `G_j = Z^p/Γ_j` with its translation action and uniform Haar measure.
//! Levels are numbered from 1 as in a tower `Γ_1 ⊇ Γ_2 ⊇ ...`.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exact::{
    hermite_normal_form, kernel_basis, smith_normal_form, IntMatrix, QSubgroup, Rat, Smith,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("subgroup chain has no levels")]
    Empty,
    #[error("level {level} matrix is {rows}x{cols}, expected {p}x{p}")]
    Shape {
        level: usize,
        rows: usize,
        cols: usize,
        p: usize,
    },
    #[error("level {0} matrix is singular")]
    Singular(usize),
    #[error("level {0} is not contained in level {}", .0 - 1)]
    NotNested(usize),
    #[error("index does not grow from level {} to level {0}", .0 - 1)]
    IndexNotIncreasing(usize),
    #[error("index {0} is too large for explicit enumeration")]
    IndexTooLarge(BigInt),
    #[error("level {level} out of range 1..={len}")]
    LevelOutOfRange { level: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModuleError {
    #[error("action matrix {0} is not unimodular")]
    NotUnimodular(usize),
    #[error("action matrices {0} and {1} do not commute")]
    NotCommuting(usize, usize),
    #[error("action matrix {index} has shape {rows}x{cols}, expected {rank}x{rank}")]
    Shape {
        index: usize,
        rows: usize,
        cols: usize,
        rank: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("index set {0:?} has odd size")]
pub struct OddSubset(pub Vec<usize>);

/// Upper bound on `N_j` for explicit coset enumeration.
const MAX_ENUMERATED_INDEX: u64 = 1 << 20;

#[derive(Debug, Clone)]
struct Level {
    matrix: IntMatrix,
    /// Lower-triangular Hermite basis of Γ_j, as machine integers.
    hnf: Vec<Vec<i64>>,
    index: usize,
}

/// Nested finite-index subgroups `Γ_1 ⊇ Γ_2 ⊇ ...` of `Z^p`; the columns of
/// the level-`j` matrix generate `Γ_j`.
#[derive(Debug, Clone)]
pub struct SubgroupChain {
    p: usize,
    levels: Vec<Level>,
}

impl SubgroupChain {
    pub fn new(p: usize, matrices: Vec<IntMatrix>) -> Result<Self, ChainError> {
        if matrices.is_empty() {
            return Err(ChainError::Empty);
        }
        let mut levels: Vec<Level> = Vec::with_capacity(matrices.len());
        for (k, a) in matrices.into_iter().enumerate() {
            let level = k + 1;
            if a.rows() != p || a.cols() != p {
                return Err(ChainError::Shape {
                    level,
                    rows: a.rows(),
                    cols: a.cols(),
                    p,
                });
            }
            let det = a.determinant().abs();
            if det.is_zero() {
                return Err(ChainError::Singular(level));
            }
            let index = det
                .to_u64()
                .filter(|&n| n <= MAX_ENUMERATED_INDEX)
                .ok_or_else(|| ChainError::IndexTooLarge(det.clone()))?
                as usize;
            let hnf = hermite_normal_form(&a)
                .and_then(|h| h.to_i64_rows())
                .ok_or(ChainError::Singular(level))?;
            let current = Level {
                matrix: a,
                hnf,
                index,
            };
            if let Some(prev) = levels.last() {
                if current.index <= prev.index {
                    return Err(ChainError::IndexNotIncreasing(level));
                }
                // Γ_{j+1} ⊆ Γ_j iff every generator of Γ_{j+1} reduces to 0 mod Γ_j
                for col in 0..p {
                    let v: Vec<i64> = (0..p)
                        .map(|i| current.matrix[(i, col)].to_i64().unwrap_or(i64::MAX))
                        .collect();
                    if reduce_mod_hnf(&prev.hnf, &v).iter().any(|&x| x != 0) {
                        return Err(ChainError::NotNested(level));
                    }
                }
            }
            levels.push(current);
        }
        Ok(Self { p, levels })
    }

    /// `Γ_j = diag(d_1^j, ..., d_p^j) Z^p` for `j = 1..=depth`.
    pub fn diagonal(degrees: &[i64], depth: usize) -> Result<Self, ChainError> {
        let p = degrees.len();
        let matrices = (1..=depth)
            .map(|j| {
                let entries: Vec<i64> = degrees.iter().map(|d| d.pow(j as u32)).collect();
                IntMatrix::diagonal(&entries)
            })
            .collect();
        Self::new(p, matrices)
    }

    /// Single level `Γ_1 = Z^p`.
    pub fn trivial(p: usize) -> Self {
        Self::new(p, vec![IntMatrix::identity(p)]).expect("identity chain is valid")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of levels `J`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn level(&self, j: usize) -> Result<&Level, ChainError> {
        if j == 0 || j > self.levels.len() {
            return Err(ChainError::LevelOutOfRange {
                level: j,
                len: self.levels.len(),
            });
        }
        Ok(&self.levels[j - 1])
    }

    pub fn matrix(&self, j: usize) -> Result<&IntMatrix, ChainError> {
        Ok(&self.level(j)?.matrix)
    }

    /// `N_j = [Z^p : Γ_j]`.
    pub fn index(&self, j: usize) -> Result<usize, ChainError> {
        Ok(self.level(j)?.index)
    }

    /// Hermite diagonal `h_11, ..., h_pp` of `Γ_j`; the box `0 <= x_i < h_ii`
    /// is the fundamental domain used for coset representatives.
    pub fn box_shape(&self, j: usize) -> Result<Vec<usize>, ChainError> {
        let hnf = &self.level(j)?.hnf;
        Ok((0..self.p).map(|i| hnf[i][i] as usize).collect())
    }

    /// Position of the coset `x + Γ_j` in the canonical enumeration.
    pub fn coset_index(&self, j: usize, x: &[i64]) -> Result<usize, ChainError> {
        let level = self.level(j)?;
        let r = reduce_mod_hnf(&level.hnf, x);
        Ok(box_position(&level.hnf, &r))
    }

    /// Coset index for a point already known to be valid at level `j`.
    fn coset_index_unchecked(&self, level: &Level, x: &[i64]) -> usize {
        box_position(&level.hnf, &reduce_mod_hnf(&level.hnf, x))
    }
}

/// Subtracts Hermite columns so that `0 <= x_i < h_ii` for every `i`.
fn reduce_mod_hnf(hnf: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    let mut r = x.to_vec();
    let p = r.len();
    for i in 0..p {
        let q = r[i].div_euclid(hnf[i][i]);
        if q != 0 {
            for k in i..p {
                r[k] -= q * hnf[k][i];
            }
        }
    }
    r
}

/// Lexicographic position inside the box, first coordinate most significant.
fn box_position(hnf: &[Vec<i64>], r: &[i64]) -> usize {
    r.iter()
        .enumerate()
        .fold(0usize, |acc, (i, &x)| acc * hnf[i][i] as usize + x as usize)
}

/// Coset representatives of `Z^p/Γ_j`: integer points of the Hermite box,
/// in lexicographic order.
pub fn coset_enumeration(chain: &SubgroupChain, j: usize) -> Result<Vec<Vec<i64>>, ChainError> {
    let shape = chain.box_shape(j)?;
    let n: usize = shape.iter().product();
    let mut reps = Vec::with_capacity(n);
    let mut current = vec![0i64; chain.p];
    for _ in 0..n {
        reps.push(current.clone());
        for i in (0..chain.p).rev() {
            current[i] += 1;
            if (current[i] as usize) < shape[i] {
                break;
            }
            current[i] = 0;
        }
    }
    Ok(reps)
}

/// Free abelian group `Z^rank` with `p` commuting automorphisms.
#[derive(Debug, Clone)]
pub struct ZpModule {
    rank: usize,
    action: Vec<IntMatrix>,
}

impl ZpModule {
    pub fn new(rank: usize, action: Vec<IntMatrix>) -> Result<Self, ModuleError> {
        for (index, t) in action.iter().enumerate() {
            if t.rows() != rank || t.cols() != rank {
                return Err(ModuleError::Shape {
                    index,
                    rows: t.rows(),
                    cols: t.cols(),
                    rank,
                });
            }
            if !t.is_unimodular() {
                return Err(ModuleError::NotUnimodular(index));
            }
        }
        let module = Self { rank, action };
        module.check_commuting()?;
        Ok(module)
    }

    /// Skips the unimodularity check; used for permutation actions.
    pub(crate) fn from_permutations(rank: usize, action: Vec<IntMatrix>) -> Self {
        Self { rank, action }
    }

    /// Rank-one module with every generator acting as the identity.
    pub fn trivial(p: usize) -> Self {
        Self {
            rank: 1,
            action: vec![IntMatrix::identity(1); p],
        }
    }

    pub fn check_commuting(&self) -> Result<(), ModuleError> {
        for a in 0..self.action.len() {
            for b in a + 1..self.action.len() {
                if &self.action[a] * &self.action[b] != &self.action[b] * &self.action[a] {
                    return Err(ModuleError::NotCommuting(a, b));
                }
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn p(&self) -> usize {
        self.action.len()
    }

    pub fn action(&self) -> &[IntMatrix] {
        &self.action
    }

    /// Stacked `(T_i - 1)` for `i ∈ subset`, one block of rows per index.
    pub fn augmentation_rows(&self, subset: &[usize]) -> IntMatrix {
        let blocks: Vec<IntMatrix> = subset
            .iter()
            .map(|&i| self.action[i].sub_identity())
            .collect();
        IntMatrix::vstack(&blocks, self.rank)
    }

    /// Side-by-side `(T_i - 1)` for `i ∈ subset`; its column span is the
    /// relation lattice of the coinvariants.
    pub fn augmentation_columns(&self, subset: &[usize]) -> IntMatrix {
        let blocks: Vec<IntMatrix> = subset
            .iter()
            .map(|&i| self.action[i].sub_identity())
            .collect();
        IntMatrix::hstack(&blocks, self.rank)
    }
}

/// Permutation module of `G_j` with `T_i` the translation by `e_i`
/// (`T_i e_c = e_{c + e_i}`).
pub fn level_module(chain: &SubgroupChain, j: usize) -> Result<ZpModule, ChainError> {
    let level = chain.level(j)?;
    let reps = coset_enumeration(chain, j)?;
    let n = reps.len();
    let action = (0..chain.p)
        .map(|i| {
            let mut t = IntMatrix::zeros(n, n);
            for (c, rep) in reps.iter().enumerate() {
                let mut shifted = rep.clone();
                shifted[i] += 1;
                t[(chain.coset_index_unchecked(level, &shifted), c)] = BigInt::one();
            }
            t
        })
        .collect();
    let module = ZpModule::from_permutations(n, action);
    debug_assert!(module.check_commuting().is_ok());
    Ok(module)
}

/// Locally constant integer function on `Σ`, given by its values on the
/// level-`j` cosets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelFunction {
    pub level: usize,
    pub coefficients: Vec<BigInt>,
}

impl LevelFunction {
    pub fn new(level: usize, coefficients: Vec<BigInt>) -> Self {
        Self {
            level,
            coefficients,
        }
    }

    pub fn from_i64(level: usize, coefficients: &[i64]) -> Self {
        Self::new(
            level,
            coefficients.iter().map(|&c| BigInt::from(c)).collect(),
        )
    }

    pub fn indicator(
        chain: &SubgroupChain,
        level: usize,
        coset: usize,
    ) -> Result<Self, ChainError> {
        let n = chain.index(level)?;
        let mut c = vec![BigInt::zero(); n];
        c[coset] = BigInt::one();
        Ok(Self::new(level, c))
    }

    pub fn constant(chain: &SubgroupChain, level: usize, value: i64) -> Result<Self, ChainError> {
        let n = chain.index(level)?;
        Ok(Self::new(level, vec![BigInt::from(value); n]))
    }
}

/// Haar integral: each level-`j` cylinder has mass `1/N_j`.
pub fn measure(f: &LevelFunction, chain: &SubgroupChain) -> Result<Rat, ChainError> {
    let n = chain.index(f.level)?;
    Ok(measure_vector(&f.coefficients, n))
}

pub(crate) fn measure_vector(v: &[BigInt], n: usize) -> Rat {
    let s: BigInt = v.iter().sum();
    Rat::new(s, BigInt::from(n))
}

/// Pulls a level-`j` function back to level `j+1` along `G_{j+1} → G_j`.
pub fn refine(f: &LevelFunction, chain: &SubgroupChain) -> Result<LevelFunction, ChainError> {
    let coarse = chain.level(f.level)?;
    let next = f.level + 1;
    let reps = coset_enumeration(chain, next)?;
    let coefficients = reps
        .iter()
        .map(|y| f.coefficients[chain.coset_index_unchecked(coarse, y)].clone())
        .collect();
    Ok(LevelFunction::new(next, coefficients))
}

/// `Z^rank / Σ_{i∈S} (T_i - 1) Z^rank`, presented through the Smith form of
/// the relation matrix.
#[derive(Debug, Clone)]
pub struct Coinvariants {
    rank: usize,
    smith: Smith,
    /// Rows of `U` that survive in the quotient (invariant factor != 1).
    kept: Vec<usize>,
    /// Modulus of each kept coordinate; zero for free coordinates.
    moduli: Vec<BigInt>,
}

impl Coinvariants {
    pub fn free_rank(&self) -> usize {
        self.moduli.iter().filter(|m| m.is_zero()).count()
    }

    /// Torsion invariant factors greater than one.
    pub fn torsion(&self) -> Vec<BigInt> {
        self.moduli
            .iter()
            .filter(|m| !m.is_zero())
            .cloned()
            .collect()
    }

    /// Projection `Z^rank → Z^free ⊕ ⊕ Z/d_k`, coordinates in the order of
    /// the kept Smith rows.
    pub fn projection_matrix(&self) -> IntMatrix {
        IntMatrix::from_fn(self.kept.len(), self.rank, |r, c| {
            self.smith.u[(self.kept[r], c)].clone()
        })
    }

    /// Quotient coordinates of `x`; torsion coordinates reduced into `[0, d)`.
    pub fn project(&self, x: &[BigInt]) -> Vec<BigInt> {
        let ux = self.smith.u.mul_vec(x);
        self.kept
            .iter()
            .zip(&self.moduli)
            .map(|(&k, m)| {
                if m.is_zero() {
                    ux[k].clone()
                } else {
                    num_integer::Integer::mod_floor(&ux[k], m)
                }
            })
            .collect()
    }

    pub fn is_zero_class(&self, x: &[BigInt]) -> bool {
        self.project(x).iter().all(Zero::is_zero)
    }

    /// Generators of the preimage in `Z^rank` of the classes fixed by the
    /// induced action of `{T_i : i ∈ subset}`.
    pub fn invariant_preimage(&self, module: &ZpModule, subset: &[usize]) -> IntMatrix {
        let n = self.rank;
        if subset.is_empty() {
            return IntMatrix::identity(n);
        }
        let torsion_slots: Vec<usize> = (0..self.kept.len())
            .filter(|&r| !self.moduli[r].is_zero())
            .collect();
        let extra = torsion_slots.len();
        let rows = subset.len() * self.kept.len();
        let cols = n + subset.len() * extra;
        let mut system = IntMatrix::zeros(rows, cols);
        let proj = self.projection_matrix();
        for (s, &i) in subset.iter().enumerate() {
            let block = &proj * &self.action_minus_one(module, i);
            for r in 0..self.kept.len() {
                let row = s * self.kept.len() + r;
                for c in 0..n {
                    system[(row, c)] = block[(r, c)].clone();
                }
            }
            for (t, &r) in torsion_slots.iter().enumerate() {
                let row = s * self.kept.len() + r;
                system[(row, n + s * extra + t)] = -self.moduli[r].clone();
            }
        }
        let kernel = kernel_basis(&system);
        kernel.row_range(0, n)
    }

    fn action_minus_one(&self, module: &ZpModule, i: usize) -> IntMatrix {
        module.action()[i].sub_identity()
    }
}

pub fn coinvariants(module: &ZpModule, subset: &[usize]) -> Coinvariants {
    let relations = module.augmentation_columns(subset);
    let smith = smith_normal_form(&relations);
    let factors = smith.invariant_factors();
    let mut kept = Vec::new();
    let mut moduli = Vec::new();
    for k in 0..module.rank() {
        let d = factors.get(k).cloned().unwrap_or_else(BigInt::zero);
        if !d.is_one() {
            kept.push(k);
            moduli.push(d);
        }
    }
    Coinvariants {
        rank: module.rank(),
        smith,
        kept,
        moduli,
    }
}

/// Basis (columns) of `{m : T_i m = m for all i ∈ subset}`.
pub fn invariants(module: &ZpModule, subset: &[usize]) -> IntMatrix {
    if subset.is_empty() {
        return IntMatrix::identity(module.rank());
    }
    kernel_basis(&module.augmentation_rows(subset))
}

/// Complement of `subset` in `0..p`.
pub fn complement(subset: &[usize], p: usize) -> Vec<usize> {
    (0..p).filter(|i| !subset.contains(i)).collect()
}

/// `Z_I[μ]` at level `j`: the measure of the `Z^I`-invariant classes among
/// the `Z^{I^c}`-coinvariants of the level-`j` module. Indices are 0-based.
pub fn z_i_mu(chain: &SubgroupChain, subset: &[usize], j: usize) -> Result<QSubgroup, ZiMuError> {
    if subset.len() % 2 == 1 {
        return Err(OddSubset(subset.to_vec()).into());
    }
    let module = level_module(chain, j)?;
    Ok(z_i_mu_of_module(&module, subset))
}

pub(crate) fn z_i_mu_of_module(module: &ZpModule, subset: &[usize]) -> QSubgroup {
    let n = module.rank();
    let rest = complement(subset, module.p());
    let preimage = if subset.is_empty() {
        IntMatrix::identity(n)
    } else if rest.is_empty() {
        invariants(module, subset)
    } else {
        coinvariants(module, &rest).invariant_preimage(module, subset)
    };
    let values: Vec<Rat> = preimage
        .columns()
        .iter()
        .map(|c| measure_vector(c, n))
        .collect();
    QSubgroup::generated_by(&values)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ZiMuError {
    #[error(transparent)]
    OddSubset(#[from] OddSubset),
    #[error(transparent)]
    Chain(#[from] ChainError),
}
