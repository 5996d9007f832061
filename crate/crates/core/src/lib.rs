//! Nash-Moser conjugation of long-range almost-periodic lattice operators.
//!
//! Given a diagonal potential `D` with non-resonant (distal) values and a
//! polynomially decaying hopping operator `T`, the iteration builds a
//! transformation `Q+` with `Q+^{-1} (T + D + D+) Q+ = D` on a finite box,
//! recording every per-step norm next to its theoretical bound. The columns
//! of `Q+` are power-law localized eigenvectors.
//!
//! Layers, bottom up:
//!
//! - [`algebra`]: lattice boxes, coefficient sequences, algebra norms, distal checks.
//! - [`operator`]: dense operators, Sobolev norms, smoothing, tame constants.
//! - [`homological`]: the two homological equations and Neumann inversion.
//! - [`iteration`]: the scheme itself, its ledger and the theory checker.
//! - [`models`]: concrete potentials and hopping profiles.
//! - [`localization`]: eigenvector, completeness and spectrum certificates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod homological;
pub mod iteration;
pub mod localization;
pub mod models;
pub mod operator;
pub mod zeta;

pub use algebra::{algebra_norm, bracket, distal_margin, sup_abs, translate, DistalReport, LatticeBox, NormPolicy, Sequence};
pub use error::{Error, Result};
pub use operator::{DiagonalOperator, LatticeOperator, TameConstants};

pub use num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/lattice.md")]
    pub struct Lattice;
    #[doc = include_str!("../../../book/src/distal.md")]
    pub struct Distal;
    #[doc = include_str!("../../../book/src/operators.md")]
    pub struct Operators;
    #[doc = include_str!("../../../book/src/homological.md")]
    pub struct Homological;
    #[doc = include_str!("../../../book/src/iteration.md")]
    pub struct Iteration;
    #[doc = include_str!("../../../book/src/localization.md")]
    pub struct Localization;
}
