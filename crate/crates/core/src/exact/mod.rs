//! Exact integer and rational linear algebra: normal forms, Pfaffians,
//! subgroups of Q and rational reconstruction.

mod matrix;
mod normal_form;
mod pfaffian;
mod rational;

pub use matrix::IntMatrix;
pub use normal_form::{
    column_echelon, hermite_normal_form, kernel_basis, lattice_coordinates, smith_normal_form,
    ColumnEchelon, Smith,
};
pub use pfaffian::{pfaffian, PfaffianError};
pub use rational::{
    format_rat, int, parse_rat, qsubgroup_canonical, qsubgroup_contains, rat, rat_determinant,
    rat_to_f64, rational_reconstruct, ParseRatError, QSubgroup, Rat,
};
