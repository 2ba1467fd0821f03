//! Smith and Hermite normal forms over the integers, with the unimodular
//! transforms kept alongside so callers can read off kernels, quotients and
//! lattice coordinates.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::IntMatrix;

/// Result of a Smith normal form computation: `u * a * v = d` with `u`, `v`
/// unimodular and `d` diagonal with `d_1 | d_2 | ...`, all non-negative.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
}

impl Smith {
    /// Diagonal entries `d_1, ..., d_min(m,n)`.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.d.rows().min(self.d.cols()))
            .map(|i| self.d[(i, i)].clone())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors()
            .iter()
            .take_while(|d| !d.is_zero())
            .count()
    }
}

/// Elementary operations mirrored onto the transform matrices.
struct Tracker {
    a: IntMatrix,
    u: IntMatrix,
    u_inv: IntMatrix,
    v: IntMatrix,
    v_inv: IntMatrix,
}

impl Tracker {
    fn new(a: &IntMatrix) -> Self {
        Self {
            a: a.clone(),
            u: IntMatrix::identity(a.rows()),
            u_inv: IntMatrix::identity(a.rows()),
            v: IntMatrix::identity(a.cols()),
            v_inv: IntMatrix::identity(a.cols()),
        }
    }

    fn row_add(&mut self, target: usize, source: usize, factor: &BigInt) {
        if factor.is_zero() {
            return;
        }
        self.a.add_row_multiple(target, source, factor);
        self.u.add_row_multiple(target, source, factor);
        self.u_inv.add_col_multiple(source, target, &-factor);
    }

    fn row_swap(&mut self, x: usize, y: usize) {
        self.a.swap_rows(x, y);
        self.u.swap_rows(x, y);
        self.u_inv.swap_cols(x, y);
    }

    fn row_negate(&mut self, i: usize) {
        self.a.negate_row(i);
        self.u.negate_row(i);
        self.u_inv.negate_col(i);
    }

    fn col_add(&mut self, target: usize, source: usize, factor: &BigInt) {
        if factor.is_zero() {
            return;
        }
        self.a.add_col_multiple(target, source, factor);
        self.v.add_col_multiple(target, source, factor);
        self.v_inv.add_row_multiple(source, target, &-factor);
    }

    fn col_swap(&mut self, x: usize, y: usize) {
        self.a.swap_cols(x, y);
        self.v.swap_cols(x, y);
        self.v_inv.swap_rows(x, y);
    }

    fn col_negate(&mut self, j: usize) {
        self.a.negate_col(j);
        self.v.negate_col(j);
        self.v_inv.negate_row(j);
    }
}

/// Smith normal form with transforms.
pub fn smith_normal_form(a: &IntMatrix) -> Smith {
    let (m, n) = (a.rows(), a.cols());
    let mut t = Tracker::new(a);
    let mut k = 0;
    while k < m.min(n) {
        let Some((pi, pj)) = smallest_nonzero(&t.a, k, k) else {
            break;
        };
        t.row_swap(k, pi);
        t.col_swap(k, pj);
        loop {
            let mut dirty = false;
            for i in k + 1..m {
                if t.a[(i, k)].is_zero() {
                    continue;
                }
                let q = t.a[(i, k)].div_floor(&t.a[(k, k)]);
                t.row_add(i, k, &-q);
                if !t.a[(i, k)].is_zero() {
                    dirty = true;
                }
            }
            for j in k + 1..n {
                if t.a[(k, j)].is_zero() {
                    continue;
                }
                let q = t.a[(k, j)].div_floor(&t.a[(k, k)]);
                t.col_add(j, k, &-q);
                if !t.a[(k, j)].is_zero() {
                    dirty = true;
                }
            }
            if dirty {
                // move the smallest remainder in row/column k onto the pivot
                let mut best = (k, k);
                for i in k + 1..m {
                    if !t.a[(i, k)].is_zero() && t.a[(i, k)].magnitude() < t.a[best].magnitude() {
                        best = (i, k);
                    }
                }
                for j in k + 1..n {
                    if !t.a[(k, j)].is_zero() && t.a[(k, j)].magnitude() < t.a[best].magnitude() {
                        best = (k, j);
                    }
                }
                t.row_swap(k, best.0);
                t.col_swap(k, best.1);
                continue;
            }
            // row and column cleared; enforce divisibility of the remainder
            let pivot = t.a[(k, k)].clone();
            if pivot.magnitude().is_one() {
                break;
            }
            let offender = (k + 1..m).find(|&i| {
                (k + 1..n).any(|j| !t.a[(i, j)].is_zero() && !t.a[(i, j)].is_multiple_of(&pivot))
            });
            match offender {
                Some(i) => t.row_add(k, i, &BigInt::one()),
                None => break,
            }
        }
        if t.a[(k, k)].is_negative() {
            t.row_negate(k);
        }
        k += 1;
    }
    Smith {
        u: t.u,
        u_inv: t.u_inv,
        d: t.a,
        v: t.v,
        v_inv: t.v_inv,
    }
}

fn smallest_nonzero(a: &IntMatrix, r0: usize, c0: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in r0..a.rows() {
        for j in c0..a.cols() {
            let x = &a[(i, j)];
            if x.is_zero() {
                continue;
            }
            if best.map_or(true, |b| x.magnitude() < a[b].magnitude()) {
                best = Some((i, j));
                if x.magnitude().is_one() {
                    return best;
                }
            }
        }
    }
    best
}

/// Column echelon form `a * v = e`, `v` unimodular. Pivot rows are strictly
/// increasing with the pivot column index; columns `rank..` of `e` are zero.
#[derive(Clone, Debug)]
pub struct ColumnEchelon {
    pub e: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
    pub rank: usize,
    /// Row index of the pivot of each of the first `rank` columns.
    pub pivot_rows: Vec<usize>,
}

pub fn column_echelon(a: &IntMatrix) -> ColumnEchelon {
    let (m, n) = (a.rows(), a.cols());
    let mut t = Tracker::new(a);
    let mut c = 0;
    let mut pivot_rows = Vec::new();
    for r in 0..m {
        if c == n {
            break;
        }
        // Euclid across the row, restricted to columns c..
        loop {
            let mut best: Option<usize> = None;
            for j in c..n {
                let x = &t.a[(r, j)];
                if !x.is_zero() && best.map_or(true, |b| x.magnitude() < t.a[(r, b)].magnitude()) {
                    best = Some(j);
                }
            }
            let Some(b) = best else { break };
            t.col_swap(c, b);
            let mut done = true;
            for j in c + 1..n {
                if t.a[(r, j)].is_zero() {
                    continue;
                }
                let q = t.a[(r, j)].div_floor(&t.a[(r, c)]);
                t.col_add(j, c, &-q);
                if !t.a[(r, j)].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if !t.a[(r, c)].is_zero() {
            pivot_rows.push(r);
            c += 1;
        }
    }
    ColumnEchelon {
        e: t.a,
        v: t.v,
        v_inv: t.v_inv,
        rank: c,
        pivot_rows,
    }
}

/// Basis (as columns) of the integer kernel `{x : a x = 0}`. The basis is
/// saturated: it spans the full lattice of integer solutions.
pub fn kernel_basis(a: &IntMatrix) -> IntMatrix {
    let ce = column_echelon(a);
    ce.v.column_range(ce.rank, a.cols())
}

/// Column-style Hermite normal form of a non-singular square matrix: lower
/// triangular `h = a * w` with positive diagonal and `0 <= h[i][j] < h[i][i]`
/// for `j < i`. Columns of `h` generate the same lattice as those of `a`.
pub fn hermite_normal_form(a: &IntMatrix) -> Option<IntMatrix> {
    if !a.is_square() {
        return None;
    }
    let n = a.rows();
    let ce = column_echelon(a);
    if ce.rank != n {
        return None;
    }
    let mut t = Tracker::new(&ce.e);
    for i in 0..n {
        if t.a[(i, i)].is_negative() {
            t.col_negate(i);
        }
        for j in 0..i {
            let q = t.a[(i, j)].div_floor(&t.a[(i, i)]);
            t.col_add(j, i, &-q);
        }
    }
    Some(t.a)
}

/// Whether `x` lies in the lattice spanned by the columns of `basis`; on
/// success returns integer coefficients `c` with `basis * c = x`.
pub fn lattice_coordinates(basis: &IntMatrix, x: &[BigInt]) -> Option<Vec<BigInt>> {
    assert_eq!(basis.rows(), x.len());
    let ce = column_echelon(basis);
    // forward substitution against the echelon columns
    let mut residual = x.to_vec();
    let mut coeffs = vec![BigInt::zero(); basis.cols()];
    for (c, &r) in ce.pivot_rows.iter().enumerate() {
        // rows above r are already cleared
        let pivot = &ce.e[(r, c)];
        let (q, rem) = residual[r].div_rem(pivot);
        if !rem.is_zero() {
            return None;
        }
        for i in 0..x.len() {
            let e = &ce.e[(i, c)];
            if !e.is_zero() {
                residual[i] -= e * &q;
            }
        }
        coeffs[c] = q;
    }
    if residual.iter().any(|v| !v.is_zero()) {
        return None;
    }
    Some(ce.v.mul_vec(&coeffs))
}
