//! Detects the two gaps of the Hofstadter model at flux 1/3, labels them
//! from the IDS and checks the labels against the frequency group.
//!
//! Takes a few seconds in release mode.

use gaplab::exact::{format_rat, rat};
use gaplab::frequency::MagneticMatrix;
use gaplab::odometer::SubgroupChain;
use gaplab::spectral::{
    detect_gaps, label_gaps, Boundary, GapParams, HamiltonianSpec, LabelParams,
};

fn main() {
    let theta = MagneticMatrix::planar(rat(1, 3));
    let spec = HamiltonianSpec::free(theta.clone(), Boundary::Periodic);
    let volumes = [12, 24, 36];
    let gaps = detect_gaps(
        &spec,
        &volumes,
        &GapParams::defaults(Boundary::Periodic, 2, &volumes),
    )
    .unwrap();
    let chain = SubgroupChain::trivial(2);
    let params = LabelParams {
        eps: 0.02,
        q_max: 12,
        max_level: 1,
    };
    for g in label_gaps(&gaps, &theta, &chain, &params).unwrap() {
        println!(
            "[{:+.4}, {:+.4}]  ids {:.6}  label {}  {:?}",
            g.gap.e_lo,
            g.gap.e_hi,
            g.gap.ids,
            g.label.as_ref().map(format_rat).unwrap_or_default(),
            g.verdict
        );
    }
}
