//! Level structure of the dyadic odometer on Z^2: cosets, the permutation
//! module, and the Z_I[μ] subgroups at each level.

use gaplab::exact::format_rat;
use gaplab::odometer::{coset_enumeration, level_module, z_i_mu, SubgroupChain};

fn main() {
    let chain = SubgroupChain::diagonal(&[2, 2], 3).expect("positive degrees");
    for j in 1..=chain.depth() {
        let reps = coset_enumeration(&chain, j).unwrap();
        let module = level_module(&chain, j).unwrap();
        let z_empty = z_i_mu(&chain, &[], j).unwrap();
        let z_full = z_i_mu(&chain, &[0, 1], j).unwrap();
        println!(
            "level {j}: index {:>3}, box {:?}, module rank {:>3}, Z_empty = ({})Z, Z_12 = ({})Z",
            chain.index(j).unwrap(),
            chain.box_shape(j).unwrap(),
            module.rank(),
            format_rat(z_empty.generator()),
            format_rat(z_full.generator()),
        );
        if j == 1 {
            println!("  coset representatives: {reps:?}");
        }
    }
}
