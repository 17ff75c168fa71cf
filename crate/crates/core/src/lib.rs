//! Dolbeault cohomology of complex solvmanifolds `C^n x_phi C^m / Gamma`
//! with a diagonal (semi-simple) action.
//!
//! The crate computes the finite basis of character-twisted invariant forms
//! that carries the Dolbeault cohomology, the Hodge and Betti tables, decides
//! the symmetry condition on the lattice, certifies harmonicity and
//! wedge-closure of the basis forms symbolically, and reports Kähler
//! obstructions.

pub mod characters;
pub mod cohomology;
pub mod error;
pub mod exact;
pub mod forms;
pub mod kahler;
pub mod manifold;
pub mod par;
pub mod report;
pub mod specfile;

pub use error::{Error, Result};
