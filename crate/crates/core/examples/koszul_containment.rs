//! Koszul cohomology of a level module and the containment check
//! μ(∪ψ_I) ⊆ Z_I[μ] for every even I.

use gaplab::cohomology::{cohomology, euler_characteristic, koszul_complex, verify_containment};
use gaplab::exact::format_rat;
use gaplab::frequency::even_subsets;
use gaplab::odometer::{level_module, SubgroupChain};

fn main() {
    let chain = SubgroupChain::diagonal(&[2, 3], 2).unwrap();
    let module = level_module(&chain, 2).unwrap();
    let complex = koszul_complex(&module).unwrap();
    for k in 0..=chain.p() {
        let h = cohomology(&complex, k).unwrap();
        let torsion: Vec<String> = h.torsion().iter().map(|t| t.to_string()).collect();
        println!("H^{k}: free rank {}, torsion {:?}", h.free_rank(), torsion);
    }
    println!(
        "Euler characteristic: {}",
        euler_characteristic(&complex).unwrap()
    );

    for subset in even_subsets(chain.p()) {
        let r = verify_containment(&chain, 2, &subset).unwrap();
        println!(
            "I = {:?}: ({})Z inside ({})Z -> {:?}",
            subset,
            format_rat(r.lhs.generator()),
            format_rat(r.rhs.generator()),
            r.verdict
        );
    }
}
