//! Symmetric informationally complete measurements in dimension four: the
//! Weyl-Heisenberg orbit, its Clifford symmetries, displacement-group
//! reconstruction, regrouping and the two-qubit view.

pub mod clifford_group;
pub mod error;
pub mod finite_group;
pub mod hw_reconstruction;
pub mod numerics;
pub mod regrouping;
pub mod sic_orbits;
pub mod two_qubit;
pub mod weyl_heisenberg;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, GroupElement, Ket, Tolerance, C64};
