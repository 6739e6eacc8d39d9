//! Numerical toolkit for the bosonized mean-field Fermi gas on the integer lattice.
//!
//! Momenta live on ℤ³ with the Fermi ball fixed by an integer k_F². Modules build on
//! each other in the order lattice → riemann → onebody → correlation / plasmon → fock.

pub mod correlation;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod onebody;
pub mod plasmon;
pub mod quad;
pub mod riemann;
pub mod system;

pub use error::{Error, Result};
pub use lattice::{FermiBall, Lune, LuneSlice, Momentum, SliceCountReport};
pub use linalg::SymOp;
pub use onebody::{BoundReport, Fault, KernelBundle};
pub use system::{FermiSystem, Potential};
