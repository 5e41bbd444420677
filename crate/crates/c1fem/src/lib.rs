//! C1-conforming rectangular finite elements for the clamped biharmonic
//! (plate bending) problem on the unit square.
//!
//! The crate implements two element families on uniform square meshes:
//!
//! * the classical Bogner-Fox-Schmit (BFS) `C1-Qk` element, `k >= 3`, and
//! * reduced `C1-Pk` serendipity elements, `k >= 4`, spanning all of `Pk`
//!   plus a small set of BFS bubble functions (9 for `k = 4`, 11 for
//!   `k = 5`, 12 for every `k >= 6`).
//!
//! On top of the element constructions the crate provides Gauss-Legendre
//! quadrature, global C1 degree-of-freedom maps, stiffness/load assembly
//! for `(Δu, Δv) = (f, v)`, dense and sparse direct solvers, and a
//! convergence-study driver with a manufactured solution.

pub mod assembly;
pub mod element;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod poly2d;
pub mod quadrature;
pub mod study;

pub use error::{Error, Result};
