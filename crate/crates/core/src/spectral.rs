//! Finite-volume magnetic Schrödinger operators on `Z^p` with potentials that
//! are locally constant along an odometer level, their integrated density of
//! states, and gap detection/labelling.
//!
//! Gauge: `(U_k ψ)(x) = exp(2πi Σ_{j<k} Θ_jk x_j) ψ(x − e_k)` (lower-triangular
//! Landau gauge). Any gauge with the same antisymmetric part is unitarily
//! equivalent, so spectra do not depend on this choice.
//!
//! A potential that is constant on cosets of `Γ_j` is periodic with period
//! lattice `Γ_j`, so a finite level only ever sees periodic approximants and
//! its gap labels live in the level-`j` frequency group.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::exact::{rat_to_f64, rational_reconstruct, Rat};
use crate::frequency::{label_membership, FrequencyError, MagneticMatrix, Membership};
use crate::odometer::{ChainError, SubgroupChain};

/// Largest `L^p` diagonalized densely; larger operators are probed by
/// inertia counting only.
pub const FULL_DIAGONALIZATION_MAX: usize = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("periodic volume {volume} is incommensurate with flux Θ[{j}][{k}]")]
    IncommensurateFlux { volume: usize, j: usize, k: usize },
    #[error(
        "periodic volume {volume} is not a period of the level-{level} potential along axis {axis}"
    )]
    IncommensuratePotential {
        volume: usize,
        level: usize,
        axis: usize,
    },
    #[error("probe energy {0} lies on the spectrum")]
    ProbeOnSpectrum(f64),
    #[error("expected {expected} potential values, got {got}")]
    PotentialLength { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("volume must be positive")]
    EmptyVolume,
    #[error("at least two volumes are needed for gap detection")]
    TooFewVolumes,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Frequency(#[from] FrequencyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Everything but the volume: a template evaluated at several `L`.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub theta: MagneticMatrix,
    pub chain: SubgroupChain,
    pub potential_level: usize,
    /// Indexed by level-`potential_level` coset.
    pub potential_values: Vec<Rat>,
    pub coupling: Rat,
    /// Integer representative of the base point `ω`.
    pub base_point: Vec<i64>,
    pub boundary: Boundary,
}

impl HamiltonianSpec {
    /// Pure magnetic Laplacian, no potential.
    pub fn free(theta: MagneticMatrix, boundary: Boundary) -> Self {
        let p = theta.p();
        Self {
            theta,
            chain: SubgroupChain::trivial(p),
            potential_level: 1,
            potential_values: vec![Rat::zero()],
            coupling: Rat::zero(),
            base_point: vec![0; p],
            boundary,
        }
    }

    pub fn p(&self) -> usize {
        self.theta.p()
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let p = self.p();
        if self.chain.p() != p {
            return Err(SpectralError::Dimension(format!(
                "Θ is {p}×{p} but the chain lives in Z^{}",
                self.chain.p()
            )));
        }
        if self.base_point.len() != p {
            return Err(SpectralError::Dimension(format!(
                "base point has {} coordinates, expected {p}",
                self.base_point.len()
            )));
        }
        let n = self.chain.index(self.potential_level)?;
        if self.potential_values.len() != n {
            return Err(SpectralError::PotentialLength {
                expected: n,
                got: self.potential_values.len(),
            });
        }
        Ok(())
    }

    /// Checks that a periodic box of side `l` is compatible with the flux and
    /// the potential.
    pub fn check_volume(&self, l: usize) -> Result<(), SpectralError> {
        if l == 0 {
            return Err(SpectralError::EmptyVolume);
        }
        if self.boundary == Boundary::Dirichlet {
            return Ok(());
        }
        let p = self.p();
        for k in 0..p {
            for j in 0..k {
                let flux = self.theta.entry(j, k) * Rat::from_integer(l.into());
                if !flux.is_integer() {
                    return Err(SpectralError::IncommensurateFlux { volume: l, j, k });
                }
            }
        }
        for axis in 0..p {
            let mut x = vec![0i64; p];
            x[axis] = l as i64;
            if self.chain.coset_index(self.potential_level, &x)? != 0 {
                return Err(SpectralError::IncommensuratePotential {
                    volume: l,
                    level: self.potential_level,
                    axis,
                });
            }
        }
        Ok(())
    }

    fn potential_at(&self, x: &[i64], values: &[f64]) -> Result<f64, SpectralError> {
        let shifted: Vec<i64> = x.iter().zip(&self.base_point).map(|(a, b)| a + b).collect();
        Ok(values[self.chain.coset_index(self.potential_level, &shifted)?])
    }
}

/// Lexicographic site numbering, first coordinate most significant.
fn site_coordinates(mut idx: usize, p: usize, l: usize) -> Vec<i64> {
    let mut x = vec![0i64; p];
    for i in (0..p).rev() {
        x[i] = (idx % l) as i64;
        idx /= l;
    }
    x
}

fn site_index(x: &[i64], l: usize) -> usize {
    x.iter().fold(0, |acc, &c| acc * l + c as usize)
}

/// Non-zero matrix elements `(row, col, value)`; both triangles present,
/// repeated positions to be summed.
fn matrix_elements(
    spec: &HamiltonianSpec,
    l: usize,
) -> Result<Vec<(usize, usize, Complex64)>, SpectralError> {
    spec.validate()?;
    spec.check_volume(l)?;
    let p = spec.p();
    let n = l.pow(p as u32);
    let lambda = rat_to_f64(&spec.coupling);
    let values: Vec<f64> = spec.potential_values.iter().map(rat_to_f64).collect();
    let theta: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..p).map(|k| rat_to_f64(spec.theta.entry(j, k))).collect())
        .collect();
    let mut out = Vec::with_capacity(n * (2 * p + 1));
    for idx in 0..n {
        let x = site_coordinates(idx, p, l);
        let v = lambda * spec.potential_at(&x, &values)?;
        if v != 0.0 {
            out.push((idx, idx, Complex64::new(v, 0.0)));
        }
        for k in 0..p {
            let mut y = x.clone();
            y[k] -= 1;
            if y[k] < 0 {
                match spec.boundary {
                    Boundary::Dirichlet => continue,
                    Boundary::Periodic => y[k] += l as i64,
                }
            }
            let angle: f64 = (0..k).map(|j| theta[j][k] * x[j] as f64).sum();
            let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * angle);
            let jdx = site_index(&y, l);
            out.push((idx, jdx, phase));
            out.push((jdx, idx, phase.conj()));
        }
    }
    Ok(out)
}

/// Dense `H = Σ_k (U_k + U_k†) + λV` on a box of side `l`.
pub fn build_hamiltonian(
    spec: &HamiltonianSpec,
    l: usize,
) -> Result<DMatrix<Complex64>, SpectralError> {
    let n = l.pow(spec.p() as u32);
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for (i, j, z) in matrix_elements(spec, l)? {
        h[(i, j)] += z;
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Inertia by symmetric indefinite (Bunch–Kaufman) elimination

const BK_ALPHA: f64 = 0.640_388_203_202_208_1; // (1 + √17) / 8

fn swap_sym(a: &mut DMatrix<Complex64>, i: usize, j: usize) {
    if i != j {
        a.swap_rows(i, j);
        a.swap_columns(i, j);
    }
}

/// Copies the conjugated lower triangle of the trailing block starting at
/// `from` into its upper triangle, with real diagonal.
fn mirror_lower(a: &mut DMatrix<Complex64>, from: usize) {
    let n = a.nrows();
    for j in from..n {
        a[(j, j)].im = 0.0;
        for i in j + 1..n {
            a[(j, i)] = a[(i, j)].conj();
        }
    }
}

/// Largest coupling of column `c` to the variables outside the leading `m`.
fn outside(a: &DMatrix<Complex64>, m: usize, c: usize) -> f64 {
    (m..a.nrows()).map(|i| a[(i, c)].norm()).fold(0.0, f64::max)
}

/// Relative pivot size below which a partial sweep postpones a variable.
const DELAY_RATIO: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Elimination {
    negatives: usize,
    /// Variables eliminated; with delays allowed these are the leading
    /// `eliminated` positions and the postponed ones follow them.
    eliminated: usize,
}

/// Eliminates the leading `m` variables of the Hermitian matrix `a` with
/// Bunch–Kaufman pivoting restricted to that block, counting negative pivots
/// (eigenvalue signs, by Sylvester's law). The trailing block of `a` then
/// holds the Schur complement.
///
/// With `delay`, a pivot that is small compared with its coupling to the
/// trailing variables is postponed instead of used: the variable is moved to
/// the end of the leading block and left uneliminated, so the caller carries
/// it into the next window. Without `delay`, a vanishing pivot column means
/// `a` is singular to within `zero_tol` and the sweep fails.
fn eliminate_leading(
    a: &mut DMatrix<Complex64>,
    mut m: usize,
    zero_tol: f64,
    delay: bool,
) -> Result<Elimination, ()> {
    let n = a.nrows();
    let mut negatives = 0;
    let mut k = 0;
    while k < m {
        let akk = a[(k, k)].re.abs();
        let (imax, colmax) = (k + 1..m)
            .map(|i| (i, a[(i, k)].norm()))
            .fold((k, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        if akk.max(colmax) <= zero_tol {
            if delay {
                swap_sym(a, k, m - 1);
                m -= 1;
                continue;
            }
            return Err(());
        }
        // Pivot choice: 1×1 at k, 1×1 at imax, or 2×2 on (k, imax).
        enum Pivot {
            At(usize),
            Pair,
        }
        let pivot = if akk >= BK_ALPHA * colmax {
            Pivot::At(k)
        } else {
            let rowmax = (k..m)
                .filter(|&j| j != imax)
                .map(|j| a[(imax, j)].norm())
                .fold(0.0, f64::max);
            if akk * rowmax >= BK_ALPHA * colmax * colmax {
                Pivot::At(k)
            } else if a[(imax, imax)].re.abs() >= BK_ALPHA * rowmax {
                Pivot::At(imax)
            } else {
                Pivot::Pair
            }
        };
        if delay {
            let (size, reach) = match pivot {
                Pivot::At(i) => (a[(i, i)].re.abs(), outside(a, m, i)),
                Pivot::Pair => {
                    let (d11, d12, d22) = (a[(k, k)].re, a[(k, imax)], a[(imax, imax)].re);
                    let big = d11.abs().max(d12.norm()).max(d22.abs());
                    (
                        (d11 * d22 - d12.norm_sqr()).abs() / big,
                        outside(a, m, k).max(outside(a, m, imax)),
                    )
                }
            };
            if size < DELAY_RATIO * reach {
                swap_sym(a, k, m - 1);
                m -= 1;
                continue;
            }
        }
        let two_by_two = match pivot {
            Pivot::At(i) => {
                swap_sym(a, k, i);
                false
            }
            Pivot::Pair => {
                swap_sym(a, k + 1, imax);
                true
            }
        };
        if !two_by_two {
            let d = a[(k, k)].re;
            if d.abs() <= zero_tol {
                return Err(());
            }
            if d < 0.0 {
                negatives += 1;
            }
            // lower triangle from column k only, mirrored, so the Schur
            // complement stays exactly Hermitian
            for j in k + 1..n {
                let f = a[(j, k)].conj() / d;
                if f.is_zero() {
                    continue;
                }
                for i in j..n {
                    let aik = a[(i, k)];
                    a[(i, j)] -= aik * f;
                }
            }
            mirror_lower(a, k + 1);
            k += 1;
        } else {
            let (d11, d12, d22) = (a[(k, k)].re, a[(k, k + 1)], a[(k + 1, k + 1)].re);
            let det = d11 * d22 - d12.norm_sqr();
            if det.abs() <= zero_tol * zero_tol {
                return Err(());
            }
            negatives += if det < 0.0 {
                1
            } else if d11 < 0.0 {
                2
            } else {
                0
            };
            for j in k + 2..n {
                let (r0, r1) = (a[(j, k)].conj(), a[(j, k + 1)].conj());
                let y0 = (r0 * d22 - d12 * r1) / det;
                let y1 = (r1 * d11 - d12.conj() * r0) / det;
                if y0.is_zero() && y1.is_zero() {
                    continue;
                }
                for i in j..n {
                    let (c0, c1) = (a[(i, k)], a[(i, k + 1)]);
                    a[(i, j)] -= c0 * y0 + c1 * y1;
                }
            }
            mirror_lower(a, k + 2);
            k += 2;
        }
    }
    Ok(Elimination {
        negatives,
        eliminated: k,
    })
}

fn max_abs(h: &DMatrix<Complex64>) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn zero_tolerance(scale: f64, n: usize) -> f64 {
    1e-13 * scale.max(1.0) * (n as f64).max(1.0)
}

/// Number of eigenvalues of the Hermitian matrix `h` strictly below `e`,
/// by inertia of `h − e·1`.
pub fn count_below(h: &DMatrix<Complex64>, e: f64) -> Result<usize, SpectralError> {
    let n = h.nrows();
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] -= Complex64::new(e, 0.0);
    }
    let tol = zero_tolerance(max_abs(&a), n);
    eliminate_leading(&mut a, n, tol, false)
        .map(|r| r.negatives)
        .map_err(|_| SpectralError::ProbeOnSpectrum(e))
}

/// IDS of `h` at `e`: fraction of eigenvalues strictly below `e`, exact.
pub fn ids_at(h: &DMatrix<Complex64>, e: f64) -> Result<Rat, SpectralError> {
    let n = h.nrows();
    let below = count_below(h, e)?;
    Ok(Rat::new(below.into(), n.max(1).into()))
}

/// `H` as a block-tridiagonal matrix over slices of the first coordinate.
/// With periodic boundaries slices `s` and `L−1−s` share a block, so the
/// wrap-around hopping stays between neighbouring blocks.
#[derive(Debug, Clone)]
pub struct BlockHamiltonian {
    diagonal: Vec<DMatrix<Complex64>>,
    /// `upper[k]` couples block `k` (rows) to block `k + 1` (columns).
    upper: Vec<DMatrix<Complex64>>,
    sites: usize,
    scale: f64,
}

impl BlockHamiltonian {
    pub fn new(spec: &HamiltonianSpec, l: usize) -> Result<Self, SpectralError> {
        let p = spec.p();
        let slice = l.pow(p as u32 - 1);
        let (blocks, locate): (usize, Box<dyn Fn(usize) -> (usize, usize)>) = match spec.boundary {
            Boundary::Dirichlet => (l, Box::new(move |s| (s, 0))),
            Boundary::Periodic => (
                l.div_ceil(2),
                Box::new(move |s| {
                    if s < l - s - 1 || s == l - s - 1 {
                        (s, 0)
                    } else {
                        (l - 1 - s, 1)
                    }
                }),
            ),
        };
        let size = |b: usize| match spec.boundary {
            Boundary::Periodic if 2 * b + 1 != l => 2 * slice,
            _ => slice,
        };
        let mut diagonal: Vec<DMatrix<Complex64>> = (0..blocks)
            .map(|b| DMatrix::zeros(size(b), size(b)))
            .collect();
        let mut upper: Vec<DMatrix<Complex64>> = (0..blocks.saturating_sub(1))
            .map(|b| DMatrix::zeros(size(b), size(b + 1)))
            .collect();
        let place = |idx: usize| {
            let (b, half) = locate(idx / slice);
            (b, half * slice + idx % slice)
        };
        let mut scale: f64 = 0.0;
        for (i, j, z) in matrix_elements(spec, l)? {
            let ((bi, oi), (bj, oj)) = (place(i), place(j));
            if bi == bj {
                diagonal[bi][(oi, oj)] += z;
            } else if bj == bi + 1 {
                upper[bi][(oi, oj)] += z;
            } else if bi == bj + 1 {
                // lower triangle is implied by hermiticity
            } else {
                unreachable!("hopping spans more than one block");
            }
            scale = scale.max(z.norm());
        }
        Ok(Self {
            diagonal,
            upper,
            sites: l.pow(p as u32),
            scale,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Eigenvalues strictly below `e`, summing the inertia of successive
    /// Schur complements.
    pub fn count_below(&self, e: f64) -> Result<usize, SpectralError> {
        let shift = |d: &DMatrix<Complex64>| {
            let mut d = d.clone();
            for i in 0..d.nrows() {
                d[(i, i)] -= Complex64::new(e, 0.0);
            }
            d
        };
        let tol = zero_tolerance(self.scale + e.abs(), self.sites);
        let mut schur = shift(&self.diagonal[0]);
        let mut total = 0;
        for k in 0..self.diagonal.len() {
            let m = schur.nrows();
            let Some(b) = self.upper.get(k) else {
                let r = eliminate_leading(&mut schur, m, tol, false)
                    .map_err(|_| SpectralError::ProbeOnSpectrum(e))?;
                total += r.negatives;
                break;
            };
            // rows of `schur` still coupled to block k + 1: the trailing
            // ones, after any postponed variables
            let coupled = b.nrows();
            let next = shift(&self.diagonal[k + 1]);
            let r = next.nrows();
            let mut w = DMatrix::<Complex64>::zeros(m + r, m + r);
            w.view_mut((0, 0), (m, m)).copy_from(&schur);
            w.view_mut((m - coupled, m), (coupled, r)).copy_from(b);
            w.view_mut((m, m - coupled), (r, coupled))
                .copy_from(&b.adjoint());
            w.view_mut((m, m), (r, r)).copy_from(&next);
            let done = eliminate_leading(&mut w, m, tol, true)
                .map_err(|_| SpectralError::ProbeOnSpectrum(e))?;
            total += done.negatives;
            let rest = m + r - done.eliminated;
            schur = w
                .view((done.eliminated, done.eliminated), (rest, rest))
                .into_owned();
        }
        Ok(total)
    }
}

// ---------------------------------------------------------------------------
// Spectral data and gaps

#[derive(Debug, Clone)]
enum Counter {
    Eigenvalues(Vec<f64>),
    Blocks(BlockHamiltonian),
}

/// Counting function of one finite-volume operator.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub volume: usize,
    pub p: usize,
    sites: usize,
    counter: Counter,
}

impl SpectralData {
    /// Full diagonalization up to [`FULL_DIAGONALIZATION_MAX`] sites,
    /// inertia counting beyond.
    pub fn compute(spec: &HamiltonianSpec, l: usize) -> Result<Self, SpectralError> {
        if l.checked_pow(spec.p() as u32)
            .is_some_and(|n| n <= FULL_DIAGONALIZATION_MAX)
        {
            Self::diagonalize(spec, l)
        } else {
            Self::by_inertia(spec, l)
        }
    }

    pub fn diagonalize(spec: &HamiltonianSpec, l: usize) -> Result<Self, SpectralError> {
        let h = build_hamiltonian(spec, l)?;
        let mut eig: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        Ok(Self {
            volume: l,
            p: spec.p(),
            sites: eig.len(),
            counter: Counter::Eigenvalues(eig),
        })
    }

    pub fn by_inertia(spec: &HamiltonianSpec, l: usize) -> Result<Self, SpectralError> {
        let blocks = BlockHamiltonian::new(spec, l)?;
        Ok(Self {
            volume: l,
            p: spec.p(),
            sites: blocks.sites(),
            counter: Counter::Blocks(blocks),
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Sorted eigenvalues when the operator was diagonalized.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        match &self.counter {
            Counter::Eigenvalues(e) => Some(e),
            Counter::Blocks(_) => None,
        }
    }

    pub fn count_below(&self, e: f64) -> Result<usize, SpectralError> {
        match &self.counter {
            Counter::Eigenvalues(eig) => {
                let k = eig.partition_point(|&x| x < e);
                let near = |i: usize| {
                    eig.get(i)
                        .is_some_and(|&x| (x - e).abs() <= 1e-11 * (1.0 + e.abs()))
                };
                if near(k) || (k > 0 && near(k - 1)) {
                    return Err(SpectralError::ProbeOnSpectrum(e));
                }
                Ok(k)
            }
            Counter::Blocks(b) => b.count_below(e),
        }
    }

    /// Count below `e`, nudging the probe upward if it hits an eigenvalue.
    fn count_near(&self, e: f64) -> usize {
        let mut x = e;
        for k in 0.. {
            match self.count_below(x) {
                Ok(c) => return c,
                Err(_) => x = e + 1e-9 * (k + 1) as f64,
            }
        }
        unreachable!()
    }

    pub fn ids(&self, e: f64) -> Result<f64, SpectralError> {
        Ok(self.count_below(e)? as f64 / self.sites as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapParams {
    /// Minimum reported width.
    pub delta: f64,
    /// Allowed IDS variation inside a plateau, across all volumes.
    pub tol: f64,
}

impl GapParams {
    pub fn defaults(boundary: Boundary, p: usize, volumes: &[usize]) -> Self {
        let l_min = volumes.iter().copied().min().unwrap_or(1).max(1) as f64;
        Self {
            delta: 0.05,
            tol: match boundary {
                Boundary::Periodic => 1e-3,
                Boundary::Dirichlet => f64::max(1e-3, 2.0 * p as f64 / l_min),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gap {
    pub e_lo: f64,
    pub e_hi: f64,
    /// IDS inside the gap at the largest volume.
    pub ids: f64,
    /// `(L, count below the gap / L^p)` for each volume, in input order.
    #[serde(serialize_with = "ser_ids_table")]
    pub ids_by_volume: Vec<(usize, Rat)>,
}

fn ser_ids_table<S: serde::Serializer>(t: &[(usize, Rat)], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(t.len()))?;
    for (l, r) in t {
        seq.serialize_element(&(l, crate::exact::format_rat(r)))?;
    }
    seq.end()
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.e_hi - self.e_lo
    }
}

/// Upper bound on the spectral radius: `2p + |λ| max|V|`.
pub fn spectral_bound(spec: &HamiltonianSpec) -> f64 {
    let vmax = spec
        .potential_values
        .iter()
        .map(|v| rat_to_f64(v).abs())
        .fold(0.0, f64::max);
    2.0 * spec.p() as f64 + rat_to_f64(&spec.coupling).abs() * vmax
}

/// Plateaus of the IDS that persist across all volumes.
///
/// Energies are probed on a grid of spacing `δ/4`; maximal runs of probes
/// whose IDS values (all volumes together) stay within `tol` are candidate
/// gaps, whose edges are then located by bisection. Plateaus below or above
/// the whole spectrum are not gaps and are dropped.
pub fn detect_gaps(
    spec: &HamiltonianSpec,
    volumes: &[usize],
    params: &GapParams,
) -> Result<Vec<Gap>, SpectralError> {
    if volumes.len() < 2 {
        return Err(SpectralError::TooFewVolumes);
    }
    let data: Vec<SpectralData> = volumes
        .par_iter()
        .map(|&l| SpectralData::compute(spec, l))
        .collect::<Result<_, _>>()?;
    Ok(gaps_from_data(&data, spectral_bound(spec) + 0.1, params))
}

/// Gap detection on precomputed spectral data (one entry per volume).
pub fn gaps_from_data(data: &[SpectralData], bound: f64, params: &GapParams) -> Vec<Gap> {
    let step = params.delta / 4.0;
    let probes = (2.0 * bound / step).ceil() as usize;
    let energy = |k: usize| -bound + (k as f64 + 0.37) * step;
    let profile = |e: f64| -> Vec<f64> {
        data.iter()
            .map(|d| d.count_near(e) as f64 / d.sites() as f64)
            .collect()
    };
    let grid: Vec<Vec<f64>> = (0..probes)
        .into_par_iter()
        .map(|k| profile(energy(k)))
        .collect();
    let spread = |vals: &[f64], lo: f64, hi: f64| {
        let (a, b) = vals
            .iter()
            .fold((lo, hi), |(a, b), &v| (a.min(v), b.max(v)));
        (a, b)
    };

    let mut gaps = Vec::new();
    let mut k = 0;
    while k < probes {
        let (mut lo, mut hi) = spread(&grid[k], f64::INFINITY, f64::NEG_INFINITY);
        let start = k;
        let mut end = k;
        while end + 1 < probes {
            let (a, b) = spread(&grid[end + 1], lo, hi);
            if b - a > params.tol {
                break;
            }
            lo = a;
            hi = b;
            end += 1;
        }
        k = end + 1;
        // the plateau can be at most (len + 1) steps wide
        if ((end - start + 2) as f64) * step < params.delta {
            continue;
        }
        let largest = data
            .iter()
            .enumerate()
            .max_by_key(|(_, d)| d.sites())
            .map(|(i, _)| i)
            .unwrap_or(0);
        let inside = |e: f64| {
            let v = profile(e);
            let (a, b) = spread(&v, lo, hi);
            b - a <= params.tol
        };
        let e_lo = if start == 0 {
            energy(0)
        } else {
            bisect(energy(start - 1), energy(start), |e| inside(e))
        };
        let e_hi = if end + 1 == probes {
            energy(end)
        } else {
            bisect(energy(end + 1), energy(end), |e| inside(e))
        };
        if e_hi - e_lo < params.delta {
            continue;
        }
        let mid = 0.5 * (e_lo + e_hi);
        let counts: Vec<usize> = data.iter().map(|d| d.count_near(mid)).collect();
        let c = counts[largest];
        if c == 0 || c == data[largest].sites() {
            continue;
        }
        gaps.push(Gap {
            e_lo,
            e_hi,
            ids: c as f64 / data[largest].sites() as f64,
            ids_by_volume: data
                .iter()
                .zip(&counts)
                .map(|(d, &c)| (d.volume, Rat::new(c.into(), d.sites().into())))
                .collect(),
        });
    }
    gaps
}

/// Boundary between `outside` (predicate false) and `inside` (true),
/// returning a point on the inside.
fn bisect(mut outside: f64, mut inside: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..48 {
        let mid = 0.5 * (outside + inside);
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GapVerdict {
    Member { level: usize },
    NotFoundUpTo { max_level: usize },
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelledGap {
    pub gap: Gap,
    pub label: Option<Rat>,
    pub membership: Option<Membership>,
    pub verdict: GapVerdict,
    /// Reconstructed labels agree at the two largest volumes.
    pub label_stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelParams {
    pub eps: f64,
    pub q_max: u64,
    pub max_level: usize,
}

/// Reconstructs a rational label for each gap and checks it against the
/// frequency groups of levels `1..=max_level`. A gap whose IDS has no
/// rational approximation within `eps` is `Unresolved`, not a failure.
pub fn label_gaps(
    gaps: &[Gap],
    theta: &MagneticMatrix,
    chain: &SubgroupChain,
    params: &LabelParams,
) -> Result<Vec<LabelledGap>, SpectralError> {
    gaps.iter()
        .map(|gap| {
            let label = rational_reconstruct(gap.ids, params.eps, params.q_max);
            let label_stable = stable_label(gap, params);
            let Some(x) = label else {
                return Ok(LabelledGap {
                    gap: gap.clone(),
                    label: None,
                    membership: None,
                    verdict: GapVerdict::Unresolved,
                    label_stable,
                });
            };
            let m = label_membership(&x, theta, chain, params.max_level)?;
            let verdict = match m.verdict {
                crate::frequency::MembershipVerdict::Member { level } => {
                    GapVerdict::Member { level }
                }
                crate::frequency::MembershipVerdict::NotFoundUpTo { max_level } => {
                    GapVerdict::NotFoundUpTo { max_level }
                }
            };
            Ok(LabelledGap {
                gap: gap.clone(),
                label: Some(x),
                membership: Some(m),
                verdict,
                label_stable,
            })
        })
        .collect()
}

fn stable_label(gap: &Gap, params: &LabelParams) -> bool {
    let mut by_size: Vec<&(usize, Rat)> = gap.ids_by_volume.iter().collect();
    by_size.sort_by_key(|(l, _)| *l);
    let labels: Vec<Option<Rat>> = by_size
        .iter()
        .rev()
        .take(2)
        .map(|(_, r)| {
            rational_reconstruct(r.to_f64().unwrap_or(f64::NAN), params.eps, params.q_max)
        })
        .collect();
    labels.windows(2).all(|w| w[0] == w[1])
}

/// Bands of the Hofstadter operator at `θ = a/q` on a commensurate periodic
/// torus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ButterflyRow {
    pub theta_num: u64,
    pub theta_den: u64,
    pub band_lo: f64,
    pub band_hi: f64,
}

/// Smallest multiple of `lcm(q, 4)` that is at least `target`; divisibility
/// by 4 puts the band-touching momenta of even `q` on the grid.
pub fn butterfly_volume(q: u64, target: usize) -> usize {
    let step = num_integer::lcm(q as usize, 4);
    step * target.div_ceil(step).max(1)
}

/// For each reduced `a/q` with `0 ≤ a < q ≤ q_max`, the `q` bands of the
/// `p = 2` magnetic Laplacian: the sorted spectrum split into `q` runs of
/// `L²/q` eigenvalues. Rows are sorted by `(q, a)`.
pub fn butterfly(q_max: u64, target_volume: usize) -> Result<Vec<ButterflyRow>, SpectralError> {
    let fractions: Vec<(u64, u64)> = (1..=q_max)
        .flat_map(|q| {
            (0..q)
                .filter(move |&a| num_integer::gcd(a, q) == 1)
                .map(move |a| (a, q))
        })
        .collect();
    let rows: Vec<Vec<ButterflyRow>> = fractions
        .par_iter()
        .map(|&(a, q)| {
            let theta = MagneticMatrix::planar(Rat::new((a as i64).into(), (q as i64).into()));
            let spec = HamiltonianSpec::free(theta, Boundary::Periodic);
            let l = butterfly_volume(q, target_volume);
            let data = SpectralData::diagonalize(&spec, l)?;
            let eig = data.eigenvalues().expect("diagonalized");
            let per_band = eig.len() / q as usize;
            Ok(eig
                .chunks(per_band)
                .map(|band| ButterflyRow {
                    theta_num: a,
                    theta_den: q,
                    band_lo: band[0],
                    band_hi: band[band.len() - 1],
                })
                .collect())
        })
        .collect::<Result<_, SpectralError>>()?;
    Ok(rows.into_iter().flatten().collect())
}
