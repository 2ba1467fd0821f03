//! Seeded generators for the randomized verification suites. Every draw
//! comes from a caller-supplied RNG, so a run is reproducible from its seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chern::ExteriorElement;
use crate::exact::{IntMatrix, Rat};
use crate::odometer::SubgroupChain;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Random `p × p` integer matrix with determinant `det`: an upper-triangular
/// factor with random diagonal split and reduced off-diagonal entries, mixed
/// by a few elementary unimodular operations on the left.
fn random_step<R: Rng>(rng: &mut R, p: usize, det: u64) -> IntMatrix {
    let mut rest = det;
    let mut diag = vec![1i64; p];
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    for (k, &i) in order.iter().enumerate() {
        let d = if k + 1 == p {
            rest
        } else {
            *divisors(rest).choose(rng).expect("1 divides everything")
        };
        diag[i] = d as i64;
        rest /= d;
    }
    let t = IntMatrix::from_fn(p, p, |i, j| {
        if i == j {
            diag[i].into()
        } else if i < j {
            rng.gen_range(0..diag[i].max(1)).into()
        } else {
            0.into()
        }
    });
    let mut u = IntMatrix::identity(p);
    if p > 1 {
        for _ in 0..rng.gen_range(0..=3) {
            let (a, b) = (rng.gen_range(0..p), rng.gen_range(0..p));
            if a != b {
                let f: i64 = rng.gen_range(-2..=2);
                let e = IntMatrix::from_fn(p, p, |i, j| {
                    if i == j {
                        1.into()
                    } else if i == a && j == b {
                        f.into()
                    } else {
                        0.into()
                    }
                });
                u = &e * &u;
            }
        }
    }
    &u * &t
}

/// Random nested chain in `Z^p` with `depth` levels and `[Z^p : Γ_depth] <=
/// max_index`. Each step multiplies the index by at least 2, so `depth` is
/// truncated when the budget runs out (never below one level).
pub fn random_chain<R: Rng>(rng: &mut R, p: usize, depth: usize, max_index: u64) -> SubgroupChain {
    assert!(max_index >= 2, "index budget must allow one proper step");
    let mut a = IntMatrix::identity(p);
    let mut index = 1u64;
    let mut matrices = Vec::new();
    for level in 0..depth {
        let budget = max_index / index;
        if budget < 2 {
            break;
        }
        let remaining = (depth - level) as f64;
        let cap = ((budget as f64).powf(1.0 / remaining).floor() as u64).clamp(2, budget);
        let det = rng.gen_range(2..=cap);
        a = &a * &random_step(rng, p, det);
        index *= det;
        matrices.push(a.clone());
    }
    SubgroupChain::new(p, matrices).expect("products of integer steps are nested")
}

/// Random rational with numerator in `-max_num..=max_num` and denominator in
/// `1..=max_den`.
pub fn random_rat<R: Rng>(rng: &mut R, max_num: i64, max_den: i64) -> Rat {
    Rat::new(
        rng.gen_range(-max_num..=max_num).into(),
        rng.gen_range(1..=max_den).into(),
    )
}

pub fn random_skew<R: Rng>(rng: &mut R, n: usize, max_num: i64, max_den: i64) -> Vec<Vec<Rat>> {
    let mut m = vec![vec![Rat::from_integer(0.into()); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let x = random_rat(rng, max_num, max_den);
            m[j][i] = -x.clone();
            m[i][j] = x;
        }
    }
    m
}

/// Random element with integer coefficients in `-bound..=bound` on a random
/// set of multi-indices.
pub fn random_integral_element<R: Rng>(rng: &mut R, n: usize, bound: i64) -> ExteriorElement {
    let mut e = ExteriorElement::zero(n).expect("small n");
    let terms = rng.gen_range(1..=(1usize << n).min(12));
    for _ in 0..terms {
        let mask: u64 = rng.gen_range(0..1u64 << n);
        let indices: Vec<usize> = (0..n)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| b + 1)
            .collect();
        let c = Rat::from_integer(rng.gen_range(-bound..=bound).into());
        let t = ExteriorElement::monomial(n, &indices, c).expect("valid indices");
        e = e.add(&t).expect("same n");
    }
    e
}
