//! Group cohomology `H^k(Z^p, M)` through the Koszul complex, cup products
//! with the degree-one classes `ψ_i`, and the finite-level containment check
//! `μ(image of ∪ψ_I) ⊆ Z_I[μ]`.
//!
//! Cochains of degree `k` live in `M ⊗ Λ^k(Z^p)`; the basis of `Λ^k` is the
//! list of increasing `k`-subsets in lexicographic order and a cochain vector
//! is laid out block by block, one block of length `rank(M)` per subset.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::exact::{
    column_echelon, kernel_basis, lattice_coordinates, smith_normal_form, IntMatrix, QSubgroup,
    Rat, Smith,
};
use crate::odometer::{
    coinvariants, complement, level_module, measure_vector, z_i_mu_of_module, ChainError,
    ModuleError, OddSubset, SubgroupChain, ZpModule,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CohomologyError {
    #[error(transparent)]
    Module(#[from] ModuleError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    OddSubset(#[from] OddSubset),
    #[error("degree {degree} out of range 0..={p}")]
    DegreeOutOfRange { degree: usize, p: usize },
    #[error("cup product would raise degree {degree} beyond {p}")]
    DegreeOverflow { degree: usize, p: usize },
    #[error("index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("cochain has length {got}, expected {expected}")]
    CochainLength { got: usize, expected: usize },
}

/// Increasing `k`-subsets of `0..p` in lexicographic order.
pub fn subsets_of_size(p: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..p {
            if p - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, p, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, p, k, &mut Vec::new(), &mut out);
    out
}

/// `e_i ∧ e_J` as `(sign, sorted union)`, or `None` when `i ∈ J`.
pub(crate) fn wedge_index(i: usize, subset: &[usize]) -> Option<(bool, Vec<usize>)> {
    if subset.contains(&i) {
        return None;
    }
    let before = subset.iter().filter(|&&j| j < i).count();
    let mut merged = subset.to_vec();
    merged.insert(before, i);
    Some((before % 2 == 0, merged))
}

#[derive(Debug, Clone)]
pub struct KoszulComplex {
    module: ZpModule,
    /// `bases[k]`: the `k`-subsets indexing blocks of degree-`k` cochains.
    bases: Vec<Vec<Vec<usize>>>,
    /// `differentials[k]`: `d_k`, degree `k` to `k + 1`, for `k < p`.
    differentials: Vec<IntMatrix>,
}

/// `d_k(m ⊗ e_J) = Σ_i (T_i - 1) m ⊗ e_i ∧ e_J`.
pub fn koszul_complex(module: &ZpModule) -> Result<KoszulComplex, CohomologyError> {
    module.check_commuting()?;
    let p = module.p();
    let n = module.rank();
    let bases: Vec<Vec<Vec<usize>>> = (0..=p).map(|k| subsets_of_size(p, k)).collect();
    let shifted: Vec<IntMatrix> = module
        .action()
        .iter()
        .map(IntMatrix::sub_identity)
        .collect();
    let mut differentials = Vec::with_capacity(p);
    for k in 0..p {
        let source = &bases[k];
        let target = &bases[k + 1];
        let mut d = IntMatrix::zeros(n * target.len(), n * source.len());
        for (col_block, subset) in source.iter().enumerate() {
            for i in 0..p {
                let Some((positive, merged)) = wedge_index(i, subset) else {
                    continue;
                };
                let row_block = target
                    .binary_search(&merged)
                    .expect("wedge of basis subsets is a basis subset");
                for r in 0..n {
                    for c in 0..n {
                        let x = &shifted[i][(r, c)];
                        if x.is_zero() {
                            continue;
                        }
                        let v = if positive { x.clone() } else { -x.clone() };
                        d[(row_block * n + r, col_block * n + c)] = v;
                    }
                }
            }
        }
        differentials.push(d);
    }
    Ok(KoszulComplex {
        module: module.clone(),
        bases,
        differentials,
    })
}

impl KoszulComplex {
    pub fn p(&self) -> usize {
        self.module.p()
    }

    pub fn module(&self) -> &ZpModule {
        &self.module
    }

    /// Rank of the degree-`k` cochain group, `rank(M) * binom(p, k)`.
    pub fn cochain_rank(&self, k: usize) -> usize {
        self.module.rank() * self.bases[k].len()
    }

    pub fn basis(&self, k: usize) -> &[Vec<usize>] {
        &self.bases[k]
    }

    pub fn differential(&self, k: usize) -> Option<&IntMatrix> {
        self.differentials.get(k)
    }

    /// Checks `d_{k+1} ∘ d_k = 0` for every `k`.
    pub fn is_complex(&self) -> bool {
        self.differentials
            .windows(2)
            .all(|w| (&w[1] * &w[0]).is_zero())
    }

    /// Offset of the block for `subset` inside a degree-`|subset|` cochain.
    pub fn block_offset(&self, subset: &[usize]) -> Option<usize> {
        self.bases
            .get(subset.len())?
            .binary_search(&subset.to_vec())
            .ok()
            .map(|b| b * self.module.rank())
    }

    /// The cochain `m ⊗ e_J`.
    pub fn elementary_cochain(&self, m: &[BigInt], subset: &[usize]) -> Option<Vec<BigInt>> {
        let off = self.block_offset(subset)?;
        let mut v = vec![BigInt::zero(); self.cochain_rank(subset.len())];
        v[off..off + m.len()].clone_from_slice(m);
        Some(v)
    }

    pub fn is_cocycle(&self, k: usize, z: &[BigInt]) -> bool {
        match self.differentials.get(k) {
            Some(d) => d.mul_vec(z).iter().all(Zero::is_zero),
            None => true,
        }
    }
}

/// Degree-`k` class given by a cocycle representative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohomologyClass {
    pub degree: usize,
    pub representative: Vec<BigInt>,
}

/// `H^k = ker d_k / im d_{k-1}` with its Smith presentation.
#[derive(Debug, Clone)]
pub struct CohomologyGroup {
    degree: usize,
    /// Saturated basis of `ker d_k`, as columns.
    cocycles: IntMatrix,
    /// Left inverse of `cocycles`: coordinates of a cocycle in that basis.
    cocycle_coords: IntMatrix,
    /// Smith form of the coboundaries written in cocycle coordinates.
    smith: Smith,
    rank_of_boundaries: usize,
}

impl CohomologyGroup {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn free_rank(&self) -> usize {
        self.cocycles.cols() - self.rank_of_boundaries
    }

    pub fn torsion(&self) -> Vec<BigInt> {
        self.smith
            .invariant_factors()
            .into_iter()
            .filter(|d| !d.is_zero() && !d.is_one())
            .collect()
    }

    pub fn cocycle_basis(&self) -> &IntMatrix {
        &self.cocycles
    }

    /// Representatives of a generating set: torsion generators first, then
    /// a basis of the free part.
    pub fn generators(&self) -> Vec<CohomologyClass> {
        let factors = self.smith.invariant_factors();
        let s = self.cocycles.cols();
        (0..s)
            .filter(|&l| l >= self.rank_of_boundaries || !factors[l].is_one())
            .map(|l| CohomologyClass {
                degree: self.degree,
                representative: self.cocycles.mul_vec(&self.smith.u_inv.column(l)),
            })
            .collect()
    }

    /// Coordinates of the class of `z` in `⊕ Z/d_l ⊕ Z^free`.
    pub fn class_coordinates(&self, z: &[BigInt]) -> Vec<BigInt> {
        let c = self.cocycle_coords.mul_vec(z);
        let y = self.smith.u.mul_vec(&c);
        let factors = self.smith.invariant_factors();
        y.into_iter()
            .enumerate()
            .filter_map(|(l, v)| {
                if l < self.rank_of_boundaries {
                    let d = &factors[l];
                    (!d.is_one()).then(|| num_integer::Integer::mod_floor(&v, d))
                } else {
                    Some(v)
                }
            })
            .collect()
    }

    pub fn is_zero_class(&self, z: &[BigInt]) -> bool {
        self.class_coordinates(z).iter().all(Zero::is_zero)
    }
}

/// Saturated basis of `ker d_k` (all cochains when `k = p`).
pub fn cocycle_basis(complex: &KoszulComplex, k: usize) -> IntMatrix {
    let n_k = complex.cochain_rank(k);
    match complex.differential(k) {
        Some(d) => kernel_basis(d),
        None => IntMatrix::identity(n_k),
    }
}

pub fn cohomology(complex: &KoszulComplex, k: usize) -> Result<CohomologyGroup, CohomologyError> {
    let p = complex.p();
    if k > p {
        return Err(CohomologyError::DegreeOutOfRange { degree: k, p });
    }
    let n_k = complex.cochain_rank(k);
    let (cocycles, cocycle_coords) = match complex.differential(k) {
        Some(d) => {
            let ce = column_echelon(d);
            (
                ce.v.column_range(ce.rank, n_k),
                ce.v_inv.row_range(ce.rank, n_k),
            )
        }
        None => (IntMatrix::identity(n_k), IntMatrix::identity(n_k)),
    };
    let boundaries = match k.checked_sub(1).and_then(|km1| complex.differential(km1)) {
        Some(d_prev) => &cocycle_coords * d_prev,
        None => IntMatrix::zeros(cocycles.cols(), 0),
    };
    let smith = smith_normal_form(&boundaries);
    let rank_of_boundaries = smith.rank();
    Ok(CohomologyGroup {
        degree: k,
        cocycles,
        cocycle_coords,
        smith,
        rank_of_boundaries,
    })
}

/// `ψ_i ∪ c`: wedges every block of the representative with `e_i`.
pub fn cup_psi(
    complex: &KoszulComplex,
    class: &CohomologyClass,
    i: usize,
) -> Result<CohomologyClass, CohomologyError> {
    let p = complex.p();
    if class.degree >= p {
        return Err(CohomologyError::DegreeOverflow {
            degree: class.degree,
            p,
        });
    }
    if i >= p {
        return Err(CohomologyError::IndexOutOfRange { index: i, p });
    }
    let expected = complex.cochain_rank(class.degree);
    if class.representative.len() != expected {
        return Err(CohomologyError::CochainLength {
            got: class.representative.len(),
            expected,
        });
    }
    let n = complex.module().rank();
    let mut out = vec![BigInt::zero(); complex.cochain_rank(class.degree + 1)];
    for (b, subset) in complex.basis(class.degree).iter().enumerate() {
        let Some((positive, merged)) = wedge_index(i, subset) else {
            continue;
        };
        let target = complex.block_offset(&merged).expect("basis subset");
        for r in 0..n {
            let x = &class.representative[b * n + r];
            if positive {
                out[target + r] += x;
            } else {
                out[target + r] -= x;
            }
        }
    }
    Ok(CohomologyClass {
        degree: class.degree + 1,
        representative: out,
    })
}

/// `∪ψ_I = ∪(ψ_{i_1} ∪ ... ∪ ψ_{i_2k})` applied to a class.
pub fn cup_psi_multi(
    complex: &KoszulComplex,
    class: &CohomologyClass,
    subset: &[usize],
) -> Result<CohomologyClass, CohomologyError> {
    subset
        .iter()
        .rev()
        .try_fold(class.clone(), |c, &i| cup_psi(complex, &c, i))
}

/// Top-degree cochains in the image of `∪ψ_I : H^{p-|I|} → H^p`, one per
/// cocycle basis vector; each is an element of `M ≅ M ⊗ e_{1..p}`.
fn psi_image_vectors(
    complex: &KoszulComplex,
    subset: &[usize],
) -> Result<Vec<Vec<BigInt>>, CohomologyError> {
    let p = complex.p();
    cocycle_basis(complex, p - subset.len())
        .columns()
        .into_iter()
        .map(|z| {
            let class = CohomologyClass {
                degree: p - subset.len(),
                representative: z,
            };
            cup_psi_multi(complex, &class, subset).map(|c| c.representative)
        })
        .collect()
}

fn check_subset(subset: &[usize], p: usize) -> Result<(), CohomologyError> {
    if subset.len() % 2 == 1 {
        return Err(OddSubset(subset.to_vec()).into());
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= p) {
        return Err(CohomologyError::IndexOutOfRange { index: i, p });
    }
    Ok(())
}

/// `μ` of the image of `∪ψ_I : H^{p-|I|}(M_j) → H^p(M_j) ≅ (M_j)_{Z^p}`.
/// `μ` vanishes on `(T_i - 1) M`, so it is evaluated on representatives.
pub fn psi_image_measure(
    chain: &SubgroupChain,
    level: usize,
    subset: &[usize],
) -> Result<QSubgroup, CohomologyError> {
    check_subset(subset, chain.p())?;
    let module = level_module(chain, level)?;
    let complex = koszul_complex(&module)?;
    Ok(psi_image_of_complex(&complex, subset)?.0)
}

fn psi_image_of_complex(
    complex: &KoszulComplex,
    subset: &[usize],
) -> Result<(QSubgroup, Vec<Vec<BigInt>>), CohomologyError> {
    let n = complex.module().rank();
    let vectors = psi_image_vectors(complex, subset)?;
    let values: Vec<Rat> = vectors.iter().map(|v| measure_vector(v, n)).collect();
    Ok((QSubgroup::generated_by(&values), vectors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one finite-level containment check.
#[derive(Debug, Clone)]
pub struct ContainmentReport {
    pub p: usize,
    pub level: usize,
    /// 0-based indices.
    pub subset: Vec<usize>,
    /// `μ(image of ∪ψ_I)`.
    pub lhs: QSubgroup,
    /// `Z_I[μ]` at the same level.
    pub rhs: QSubgroup,
    pub verdict: Verdict,
    /// Whether every image class lifts to a `Z^I`-invariant class of the
    /// `Z^{I^c}`-coinvariants. Diagnostic only, never part of the verdict.
    pub lifts: bool,
}

/// Checks `μ(image of ∪ψ_I) ⊆ Z_I[μ]` at level `j`.
pub fn verify_containment(
    chain: &SubgroupChain,
    level: usize,
    subset: &[usize],
) -> Result<ContainmentReport, CohomologyError> {
    check_subset(subset, chain.p())?;
    let module = level_module(chain, level)?;
    let complex = koszul_complex(&module)?;
    verify_containment_for_module(&complex, level, subset)
}

pub(crate) fn verify_containment_for_module(
    complex: &KoszulComplex,
    level: usize,
    subset: &[usize],
) -> Result<ContainmentReport, CohomologyError> {
    let module = complex.module();
    let (lhs, vectors) = psi_image_of_complex(complex, subset)?;
    let rhs = z_i_mu_of_module(module, subset);
    let verdict = if lhs.is_subgroup_of(&rhs) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let lifts = lift_diagnostic(module, subset, &vectors);
    Ok(ContainmentReport {
        p: module.p(),
        level,
        subset: subset.to_vec(),
        lhs,
        rhs,
        verdict,
        lifts,
    })
}

fn lift_diagnostic(module: &ZpModule, subset: &[usize], vectors: &[Vec<BigInt>]) -> bool {
    let n = module.rank();
    let rest = complement(subset, module.p());
    let preimage = coinvariants(module, &rest).invariant_preimage(module, subset);
    let all: Vec<usize> = (0..module.p()).collect();
    let relations = module.augmentation_columns(&all);
    let lattice = IntMatrix::hstack(&[preimage, relations], n);
    vectors
        .iter()
        .all(|v| lattice_coordinates(&lattice, v).is_some())
}

/// Alternating sum of cohomology ranks.
pub fn euler_characteristic(complex: &KoszulComplex) -> Result<i64, CohomologyError> {
    let mut chi = 0i64;
    for k in 0..=complex.p() {
        let r = cohomology(complex, k)?.free_rank() as i64;
        chi += if k % 2 == 0 { r } else { -r };
    }
    Ok(chi)
}

/// Single-element cochain helper for tests and examples: `1 ⊗ e_J` on a
/// rank-one module.
pub fn unit_class(complex: &KoszulComplex, subset: &[usize]) -> Option<CohomologyClass> {
    if complex.module().rank() != 1 {
        return None;
    }
    complex
        .elementary_cochain(&[BigInt::one()], subset)
        .map(|representative| CohomologyClass {
            degree: subset.len(),
            representative,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::odometer::invariants;

    fn dyadic_module() -> ZpModule {
        level_module(&SubgroupChain::diagonal(&[2], 1).unwrap(), 1).unwrap()
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(
            subsets_of_size(3, 2),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        assert_eq!(subsets_of_size(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(subsets_of_size(5, 3).len(), 10);
    }

    #[test]
    fn trivial_module_has_zero_differentials() {
        let c = koszul_complex(&ZpModule::trivial(2)).unwrap();
        assert!(c.differential(0).unwrap().is_zero());
        assert!(c.differential(1).unwrap().is_zero());
        let ranks: Vec<usize> = (0..=2)
            .map(|k| cohomology(&c, k).unwrap().free_rank())
            .collect();
        assert_eq!(ranks, vec![1, 2, 1]);
    }

    #[test]
    fn dyadic_regular_module() {
        let c = koszul_complex(&dyadic_module()).unwrap();
        let d0 = c.differential(0).unwrap();
        assert_eq!(*d0, IntMatrix::from_rows(&[[-1, 1], [1, -1]]));
        let h0 = cohomology(&c, 0).unwrap();
        let h1 = cohomology(&c, 1).unwrap();
        assert_eq!((h0.free_rank(), h0.torsion().len()), (1, 0));
        assert_eq!((h1.free_rank(), h1.torsion().len()), (1, 0));
    }

    #[test]
    fn non_commuting_action_is_rejected() {
        let swap = IntMatrix::from_rows(&[[0, 1], [1, 0]]);
        let shear = IntMatrix::from_rows(&[[1, 1], [0, 1]]);
        let m = ZpModule::from_permutations(2, vec![swap, shear]);
        assert!(matches!(
            koszul_complex(&m),
            Err(CohomologyError::Module(ModuleError::NotCommuting(0, 1)))
        ));
    }

    #[test]
    fn cup_products_on_trivial_module() {
        let c = koszul_complex(&ZpModule::trivial(2)).unwrap();
        let one = unit_class(&c, &[]).unwrap();
        let top = cup_psi(&c, &cup_psi(&c, &one, 1).unwrap(), 0).unwrap();
        assert_eq!(top, unit_class(&c, &[0, 1]).unwrap());
        let h2 = cohomology(&c, 2).unwrap();
        assert!(!h2.is_zero_class(&top.representative));
        assert_eq!(h2.class_coordinates(&top.representative).len(), 1);

        let twice = cup_psi(&c, &cup_psi(&c, &one, 0).unwrap(), 0).unwrap();
        assert!(twice.representative.iter().all(Zero::is_zero));

        let a = cup_psi(&c, &cup_psi(&c, &one, 1).unwrap(), 0).unwrap();
        let b = cup_psi(&c, &cup_psi(&c, &one, 0).unwrap(), 1).unwrap();
        let sum: Vec<BigInt> = a
            .representative
            .iter()
            .zip(&b.representative)
            .map(|(x, y)| x + y)
            .collect();
        assert!(h2.is_zero_class(&sum));
        assert!(cup_psi(&c, &top, 0).is_err());
    }

    #[test]
    fn top_cohomology_is_coinvariants() {
        let chain = SubgroupChain::new(2, vec![IntMatrix::from_rows(&[[2, 0], [1, 3]])]).unwrap();
        let m = level_module(&chain, 1).unwrap();
        let c = koszul_complex(&m).unwrap();
        assert!(c.is_complex());
        let h2 = cohomology(&c, 2).unwrap();
        let q = coinvariants(&m, &[0, 1]);
        assert_eq!(h2.free_rank(), q.free_rank());
        assert_eq!(h2.torsion(), q.torsion());
        let h0 = cohomology(&c, 0).unwrap();
        assert_eq!(h0.free_rank(), invariants(&m, &[0, 1]).cols());
        assert_eq!(euler_characteristic(&c).unwrap(), 0);
    }

    #[test]
    fn psi_image_examples() {
        let trivial = SubgroupChain::trivial(2);
        assert_eq!(
            psi_image_measure(&trivial, 1, &[0, 1]).unwrap(),
            QSubgroup::integers()
        );
        let dd = SubgroupChain::diagonal(&[2, 2], 2).unwrap();
        assert_eq!(
            psi_image_measure(&dd, 1, &[0, 1]).unwrap(),
            QSubgroup::integers()
        );
        assert_eq!(
            psi_image_measure(&dd, 2, &[]).unwrap(),
            crate::odometer::z_i_mu(&dd, &[], 2).unwrap()
        );
        assert_eq!(
            psi_image_measure(&dd, 1, &[]).unwrap(),
            QSubgroup::cyclic(rat(1, 4))
        );
        assert!(matches!(
            psi_image_measure(&dd, 1, &[0]),
            Err(CohomologyError::OddSubset(_))
        ));
    }

    #[test]
    fn containment_on_diag_2_3_tower() {
        let chain = SubgroupChain::diagonal(&[2, 3], 3).unwrap();
        for j in 1..=3 {
            for subset in [vec![], vec![0, 1]] {
                let r = verify_containment(&chain, j, &subset).unwrap();
                assert_eq!(r.verdict, Verdict::Pass, "level {j} subset {subset:?}");
            }
        }
    }

    #[test]
    fn measure_kills_coboundaries_in_top_degree() {
        let chain = SubgroupChain::diagonal(&[2, 3], 1).unwrap();
        let m = level_module(&chain, 1).unwrap();
        let c = koszul_complex(&m).unwrap();
        let d = c.differential(1).unwrap();
        for col in d.columns() {
            assert_eq!(measure_vector(&col, m.rank()), Rat::zero());
        }
    }
}
