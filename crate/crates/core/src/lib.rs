#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Extremal dynamics of rank-2 sub-Riemannian structures.
//!
//! Exact polynomial frames and Lie brackets, abnormal feedback flows with Goh
//! projection, classification of the trace-free matrix `A`, rescaled polar
//! dynamics, and direct length minimisation.

extern crate alloc;

pub mod error;
pub mod extremals;
pub mod linalg;
pub mod ode;
pub mod optimize;
pub mod phase;
pub mod poly;
pub mod structures;
pub mod vfield;

pub use error::{Error, Result};
pub use poly::{parse_poly, Poly};
pub use vfield::{bracket_of_word, evaluate, lie_bracket, BracketWord, CompiledField, PolyVecField};
