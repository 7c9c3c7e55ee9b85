//! Determinant-line invariants of flat vector bundles over closed oriented
//! combinatorial manifolds.
//!
//! Twisted chain complexes are built from a cell complex and flat transport
//! data. Torsions come from the canonical map between the determinant of the
//! chains and the determinant of homology, and the duality scalars and
//! metrics are evaluated on top of it. A finite-dimensional Hodge-theoretic
//! oracle and closed-form torsion families serve as cross-checks.

#![allow(clippy::needless_range_loop)]

pub mod complex;
pub mod detline;
pub mod duality;
pub mod error;
pub mod families;
pub mod homology;
pub mod io;
pub mod local_system;
pub mod matrix;
pub mod oracle;
pub mod par;
pub mod pr_metric;
pub mod scalar;

pub use error::{Error, Result};
