//! Two two-level atoms in a thermal cavity: Hamiltonian, open and closed
//! dynamics, and the concurrence between the atoms.
//!
//! The guide in `book/` walks through the conventions and the physics; its
//! snippets run as doc-tests of this crate.

pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod sectors;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/concurrence.md")]
    mod concurrence {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    mod sweeps {}
    #[doc = include_str!("../../../book/src/caveats.md")]
    mod caveats {}
}
