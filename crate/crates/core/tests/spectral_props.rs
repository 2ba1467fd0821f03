use std::f64::consts::PI;

use gaplab::exact::{rat, rat_to_f64, Rat};
use gaplab::frequency::MagneticMatrix;
use gaplab::odometer::SubgroupChain;
use gaplab::spectral::{
    build_hamiltonian, count_below, ids_at, BlockHamiltonian, Boundary, HamiltonianSpec,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Zero};
use proptest::prelude::*;

/// A commensurate spec together with a box side `L ≤ 12`.
fn spec_and_volume() -> impl Strategy<Value = (HamiltonianSpec, usize)> {
    (
        1usize..=2,
        prop::sample::select(vec![1i64, 2, 3, 4, 6]),
        0i64..6,
        prop::sample::select(vec![1i64, 2, 3]),
        1usize..=2,
        -3i64..=3,
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(p, q, a, d, depth, lambda, periodic, seed)| {
            let theta = if p == 2 {
                MagneticMatrix::planar(rat(a, q))
            } else {
                MagneticMatrix::zero(1)
            };
            let l_max = if p == 1 { 24 } else { 12 };
            // keep the commensurate period inside the box budget
            let depth = if (q as usize).lcm(&(d.pow(depth as u32) as usize)) > l_max {
                1
            } else {
                depth
            };
            let degrees = vec![d; p];
            let chain = SubgroupChain::diagonal(&degrees, depth)
                .unwrap_or_else(|_| SubgroupChain::trivial(p));
            let level = chain.depth();
            let n = chain.index(level).unwrap();
            let values = (0..n)
                .map(|k| rat(((seed >> (k % 60)) & 3) as i64, 1))
                .collect();
            let period = (q as usize).lcm(&(d.pow(depth as u32) as usize));
            let l = period * (l_max / period).max(1);
            let spec = HamiltonianSpec {
                theta,
                chain,
                potential_level: level,
                potential_values: values,
                coupling: rat(lambda, 1),
                base_point: vec![(seed % 5) as i64; p],
                boundary: if periodic {
                    Boundary::Periodic
                } else {
                    Boundary::Dirichlet
                },
            };
            (spec, l)
        })
}

fn eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let mut e: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hamiltonian_is_hermitian((spec, l) in spec_and_volume()) {
        let h = build_hamiltonian(&spec, l).unwrap();
        prop_assert_eq!(h.adjoint(), h);
    }

    #[test]
    fn trace_is_the_potential_sum((spec, l) in spec_and_volume()) {
        let h = build_hamiltonian(&spec, l).unwrap();
        let p = spec.p();
        let n = spec.chain.index(spec.potential_level).unwrap();
        // every coset occurs equally often in a commensurate box; for
        // Dirichlet the box is the same size, so the count is identical
        let per_coset = Rat::new(l.pow(p as u32).into(), n.into());
        let sum: Rat = spec.potential_values.iter().fold(Rat::zero(), |acc, v| acc + v);
        let expected = rat_to_f64(&(&spec.coupling * sum * per_coset));
        prop_assert!((h.trace().re - expected).abs() < 1e-9);
        prop_assert!(h.trace().im.abs() < 1e-12);
    }

    #[test]
    fn inertia_counts_match_eigenvalues((spec, l) in spec_and_volume(), probes in prop::collection::vec(-12.0f64..12.0, 8)) {
        let h = build_hamiltonian(&spec, l).unwrap();
        let eig = eigenvalues(&h);
        let block = BlockHamiltonian::new(&spec, l).unwrap();
        for e in probes {
            if eig.iter().any(|x| (x - e).abs() < 1e-6) {
                continue;
            }
            let expected = eig.iter().filter(|&&x| x < e).count();
            prop_assert_eq!(count_below(&h, e).unwrap(), expected);
            prop_assert_eq!(block.count_below(e).unwrap(), expected);
        }
    }

    #[test]
    fn ids_is_a_monotone_distribution((spec, l) in spec_and_volume()) {
        let h = build_hamiltonian(&spec, l).unwrap();
        prop_assert_eq!(ids_at(&h, -100.0).unwrap(), Rat::zero());
        prop_assert_eq!(ids_at(&h, 100.0).unwrap(), Rat::one());
        let mut last = Rat::zero();
        for k in 0..50 {
            let e = -16.0 + 0.64 * k as f64 + 1e-7;
            if let Ok(v) = ids_at(&h, e) {
                prop_assert!(v >= last);
                last = v;
            }
        }
    }

    #[test]
    fn diagonal_phases_leave_the_spectrum((spec, l) in spec_and_volume(), seed in any::<u64>()) {
        use rand::Rng;
        let h = build_hamiltonian(&spec, l).unwrap();
        let mut rng = gaplab::random::rng_from_seed(seed);
        let n = h.nrows();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI))
        }));
        let g = &d * &h * d.adjoint();
        for (a, b) in eigenvalues(&h).iter().zip(eigenvalues(&g)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_field_constant_potential_is_a_shifted_laplacian() {
    for p in 1..=2usize {
        let l = 8;
        let spec = HamiltonianSpec {
            theta: MagneticMatrix::zero(p),
            chain: SubgroupChain::trivial(p),
            potential_level: 1,
            potential_values: vec![rat(3, 2)],
            coupling: rat(2, 1),
            base_point: vec![0; p],
            boundary: Boundary::Periodic,
        };
        let got = eigenvalues(&build_hamiltonian(&spec, l).unwrap());
        let band = |k: usize| 2.0 * (2.0 * PI * k as f64 / l as f64).cos();
        let mut expected: Vec<f64> = (0..l.pow(p as u32))
            .map(|idx| (0..p).map(|i| band(idx / l.pow(i as u32) % l)).sum::<f64>() + 3.0)
            .collect();
        expected.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

/// Integer potentials make slice blocks exactly singular at integer
/// energies even when the full operator is not; the block sweep must still
/// count correctly there.
#[test]
fn block_sweep_survives_singular_slices() {
    for boundary in [Boundary::Dirichlet, Boundary::Periodic] {
        let chain = SubgroupChain::diagonal(&[3, 3], 1).unwrap();
        let spec = HamiltonianSpec {
            theta: MagneticMatrix::planar(rat(1, 4)),
            chain,
            potential_level: 1,
            potential_values: [0, 2, 3, 1, 0, 1, 2, 0, 3]
                .iter()
                .map(|&v| rat(v, 1))
                .collect(),
            coupling: rat(-1, 1),
            base_point: vec![0, 0],
            boundary,
        };
        let l = 24;
        let h = build_hamiltonian(&spec, l).unwrap();
        let eig = eigenvalues(&h);
        let block = BlockHamiltonian::new(&spec, l).unwrap();
        for k in -12..=12 {
            let e = k as f64 * 0.5;
            if eig.iter().any(|x| (x - e).abs() < 1e-6) {
                continue;
            }
            let expected = eig.iter().filter(|&&x| x < e).count();
            assert_eq!(
                block.count_below(e).unwrap(),
                expected,
                "{boundary:?} E={e}"
            );
        }
    }
}

#[test]
fn path_graph_closed_form() {
    let spec = HamiltonianSpec::free(MagneticMatrix::zero(1), Boundary::Dirichlet);
    let h = build_hamiltonian(&spec, 3).unwrap();
    let got = eigenvalues(&h);
    let s = 2f64.sqrt();
    for (a, b) in got.iter().zip([-s, 0.0, s]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(ids_at(&h, 0.5).unwrap(), rat(2, 3));
}
