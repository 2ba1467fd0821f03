//! Smith and Hermite forms, a Pfaffian, and recovering a fraction from a
//! float.
//!
//!     cargo run --example exact_linalg

use gaplab::exact::{
    format_rat, hermite_normal_form, pfaffian, rat, rational_reconstruct, smith_normal_form,
    IntMatrix,
};

fn main() {
    let a = IntMatrix::from_rows(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]);
    let s = smith_normal_form(&a);
    println!(
        "invariant factors: {:?}",
        s.invariant_factors()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
    );
    println!("U A V == D: {}", &(&s.u * &a) * &s.v == s.d);

    if let Some(h) = hermite_normal_form(&a) {
        println!("HNF rows: {:?}", h.to_i64_rows());
    }

    let theta = vec![
        vec![rat(0, 1), rat(1, 2), rat(1, 3), rat(0, 1)],
        vec![rat(-1, 2), rat(0, 1), rat(0, 1), rat(2, 1)],
        vec![rat(-1, 3), rat(0, 1), rat(0, 1), rat(1, 5)],
        vec![rat(0, 1), rat(-2, 1), rat(-1, 5), rat(0, 1)],
    ];
    println!("Pf = {}", format_rat(&pfaffian(&theta).unwrap()));

    let x = 0.285_714_3; // 2/7 to seven digits
    let r = rational_reconstruct(x, 1e-6, 12).unwrap();
    println!("{x} ~ {}", format_rat(&r));
}
