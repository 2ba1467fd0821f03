//! Integrality of Chern characters on T^n, with the witness probe when it
//! fails, and a pullback along a solenoidal cover.

use gaplab::chern::{integrality_check, solenoid_pullback, suspension_ranks, ExteriorElement};
use gaplab::exact::{format_rat, rat};

fn show(e: &ExteriorElement) -> String {
    let terms: Vec<String> = e
        .terms()
        .iter()
        .map(|(i, c)| {
            let dx: String = i.iter().map(|k| format!("dx{k}")).collect();
            format!(
                "{c}{}",
                if dx.is_empty() {
                    String::new()
                } else {
                    format!(" {dx}")
                }
            )
        })
        .collect();
    terms.join(" + ")
}

fn main() {
    // ch of the line bundle with curvature dx1 dx2 + dx3 dx4
    let f = ExteriorElement::pair(4, 1, 2)
        .unwrap()
        .add(&ExteriorElement::pair(4, 3, 4).unwrap())
        .unwrap();
    let ch = f.exp().unwrap();
    println!("exp(F) = {}", show(&ch));
    println!("  {:?}", integrality_check(&ch).verdict);

    let half = ExteriorElement::one(2)
        .unwrap()
        .add(&ExteriorElement::monomial(2, &[1, 2], rat(1, 2)).unwrap())
        .unwrap();
    let report = integrality_check(&half);
    println!("{}: {:?}", show(&half), report.verdict);
    if let Some(w) = report.witness {
        println!(
            "  witness: subtorus {:?}, pairs {:?}, value {}",
            w.subtorus,
            w.pairs,
            format_rat(&w.value)
        );
    }

    let pulled = solenoid_pullback(&ch, &[2, 3, 2, 3]).unwrap();
    println!(
        "pulled back: {} ({:?})",
        show(&pulled),
        integrality_check(&pulled).verdict
    );

    for n in 1..=4 {
        let s = suspension_ranks(n);
        println!(
            "S(T^{n}) spheres {:?}, K^0 rank {}",
            s.multiplicities,
            s.even_k_rank()
        );
    }
}
