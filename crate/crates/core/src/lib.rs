//! Sparse synchronous linear circuits for Kronecker powers, built from
//! low-rank-plus-sparse (rigidity) decompositions of the base matrix.

pub mod circuit;
pub mod disjointness;
pub mod error;
pub mod field;
pub mod io;
pub mod mm;
pub mod par;
pub mod rigidity;
pub mod sparse;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
pub use field::{Field, FieldCtx, PrimeField, Rationals, Scalar};
pub use sparse::{IndexCodec, SparseMatrix};
