#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Spectral asymptotics of Jacobi operators with entries
//! `d(k) = k + v(k)`, `a(k) ≍ k^γ`.
//!
//! The crate builds the truncated operators `J_n`, computes their spectra
//! exactly through block decoupling, realizes the conjugation `e^{iB_n}` as a
//! real orthogonal matrix, evaluates the oscillatory symbol calculus at
//! finite truncation, and fits decay rates of every remainder.

pub mod conjugation;
pub mod eigensolve;
pub mod error;
pub mod experiment;
pub mod operators;
pub mod oscillatory;
pub mod rates;
pub mod sequences;
pub mod validate;

pub use error::{Error, Result};
