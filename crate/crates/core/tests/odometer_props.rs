use gaplab::exact::{QSubgroup, Rat};
use gaplab::frequency::even_subsets;
use gaplab::odometer::{level_module, measure, refine, z_i_mu, LevelFunction, SubgroupChain};
use gaplab::random::{random_chain, rng_from_seed};
use num_bigint::BigInt;
use proptest::prelude::*;

/// Random chain in `Z^p` with `p ∈ {1, 2, 3}`, built from a proptest seed.
fn chain() -> impl Strategy<Value = SubgroupChain> {
    (1usize..=3, 1usize..=3, any::<u64>()).prop_map(|(p, depth, seed)| {
        let cap = [0, 64, 64, 36][p];
        random_chain(&mut rng_from_seed(seed), p, depth, cap)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn translations_commute_and_permute(c in chain()) {
        for j in 1..=c.depth() {
            let m = level_module(&c, j).unwrap();
            prop_assert_eq!(m.rank(), c.index(j).unwrap());
            prop_assert!(m.check_commuting().is_ok());
            for t in m.action() {
                prop_assert!(t.is_unimodular());
            }
        }
    }

    #[test]
    fn measure_survives_refinement(c in chain(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        for j in 1..c.depth() {
            let n = c.index(j).unwrap();
            let coeffs: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
            let f = LevelFunction::from_i64(j, &coeffs);
            let g = refine(&f, &c).unwrap();
            prop_assert_eq!(g.level, j + 1);
            prop_assert_eq!(measure(&g, &c).unwrap(), measure(&f, &c).unwrap());
        }
    }

    #[test]
    fn z_i_mu_grows_along_the_tower(c in chain()) {
        for subset in even_subsets(c.p()) {
            for j in 1..c.depth() {
                let a = z_i_mu(&c, &subset, j).unwrap();
                let b = z_i_mu(&c, &subset, j + 1).unwrap();
                prop_assert!(a.is_subgroup_of(&b), "I={:?} j={}: {} not in {}", subset, j, a, b);
            }
        }
    }

    #[test]
    fn sandwich(c in chain()) {
        let all: Vec<usize> = (0..c.p()).collect();
        for j in 1..=c.depth() {
            let bottom = z_i_mu(&c, &[], j).unwrap();
            let n = c.index(j).unwrap() as i64;
            prop_assert_eq!(&bottom, &QSubgroup::cyclic(Rat::new(1.into(), n.into())));
            if c.p() % 2 == 0 {
                prop_assert_eq!(z_i_mu(&c, &all, j).unwrap(), QSubgroup::integers());
            }
            for subset in even_subsets(c.p()) {
                let z = z_i_mu(&c, &subset, j).unwrap();
                prop_assert!(QSubgroup::integers().is_subgroup_of(&z));
                prop_assert!(z.is_subgroup_of(&bottom));
            }
        }
    }

    #[test]
    fn indicator_has_cylinder_mass(c in chain(), k in any::<prop::sample::Index>()) {
        let j = c.depth();
        let n = c.index(j).unwrap();
        let f = LevelFunction::indicator(&c, j, k.index(n)).unwrap();
        prop_assert_eq!(measure(&f, &c).unwrap(), Rat::new(BigInt::from(1), BigInt::from(n)));
    }
}

#[test]
fn odd_subsets_are_rejected() {
    let c = SubgroupChain::diagonal(&[2, 2, 2], 1).unwrap();
    assert!(z_i_mu(&c, &[0], 1).is_err());
}
