//! Numerical workbench for six-vertex transfer matrices, Baxter Q-operators,
//! the algebraic Bethe ansatz, the fusion hierarchy and the loop-algebra
//! symmetry at roots of unity.
//!
//! All operators are built as explicit dense matrices on (C²)^⊗M with site 1
//! the leftmost tensor factor and |0⟩ = spin up.

pub mod bethe;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod loopsym;
pub mod params;
pub mod operators;
pub mod relations;
pub mod repkit;
pub mod serial;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use num_complex::Complex64 as C64;
pub use params::{Branched, ModelParams};
