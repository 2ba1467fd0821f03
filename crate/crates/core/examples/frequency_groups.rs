//! The magnetic frequency group Σ Pf(Θ_I) Z_I[μ] and membership of a few
//! candidate gap labels.

use gaplab::exact::{format_rat, rat};
use gaplab::frequency::{frequency_group, label_membership, MagneticMatrix};
use gaplab::odometer::SubgroupChain;

fn main() {
    let theta = MagneticMatrix::planar(rat(1, 3));
    let chain = SubgroupChain::diagonal(&[2, 1], 3).unwrap();

    for level in 1..=chain.depth() {
        let g = frequency_group(&theta, &chain, level).unwrap();
        println!("level {level}: ({})Z", format_rat(g.total.generator()));
    }

    for x in [rat(1, 3), rat(5, 24), rat(1, 5)] {
        let m = label_membership(&x, &theta, &chain, 3).unwrap();
        print!("{:>5}: {:?}", format_rat(&x), m.verdict);
        for t in &m.decomposition {
            print!(
                "  [{} * {} * {}]",
                t.multiplier,
                format_rat(&t.pfaffian),
                format_rat(&t.z_i_mu_generator)
            );
        }
        println!();
    }
}
