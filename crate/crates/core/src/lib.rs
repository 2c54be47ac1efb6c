//! Matrix-valued thermodynamic formalism for affine iterated function systems.
//!
//! The crate computes the Perron data of matrix Ruelle operators acting on
//! symmetric operators over `Λ^q(R^d)`, the associated Kusuoka cylinder
//! measures, dynamical zeta functions, trace-weighted periodic orbit counts and
//! Lyapunov-matrix estimates.
//!
//! Symbols are 0-based internally (`0..t`); the textual form of a word
//! ([`SymWord`]'s `Display` and [`SymWord::parse`]) is 1-based.

pub mod error;
pub mod exterior;
pub mod ifs;
pub mod linalg;
pub mod lyapunov;
pub mod orbits;
pub mod symbolic;
pub mod transfer;

pub use error::{Error, Result};
pub use exterior::{
    hilbert_metric, hs_inner, pullback_matrix, push_forward, push_forward_t, sym_basis,
    PushForwardFamily, QFormBasis, SymBasis, SymOperator,
};
pub use ifs::{AffineMap, IfsSpec, Verification};
pub use orbits::{CountingTables, OrbitRecord};
pub use symbolic::{Potential, SymWord};
pub use transfer::{BlockOperator, CylinderMeasure, SpectralResult};
