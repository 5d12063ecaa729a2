//! Dense complex linear algebra shared by every other module.

mod array;
mod dft;
pub mod io;
mod linalg;

pub use array::{inner, real_inner, ComplexArray};
pub use dft::{unitary_dft, unitary_idft, Dft2};
pub use linalg::{cholesky, reconstruction_error, CholeskyFactor, HermitianMatrix, HERMITIAN_TOL};
pub use num_complex::Complex64;
