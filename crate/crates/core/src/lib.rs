//! Numerical toolkit for linear cocycles over compact base dynamics.
//!
//! The crate computes, at desk scale:
//!
//! * Lyapunov exponent ladders and Oseledets-type splittings for matrix
//!   cocycles driven by full shifts, circle rotations, and finite periodic
//!   orbits ([`lyapunov`]);
//! * exponential-dichotomy certificates for exponentially shifted cocycles
//!   and the resulting dichotomy (Sacker--Sell) spectrum ([`dichotomy`],
//!   [`spectrum`]);
//! * certified upper bounds on measures of noncompactness and
//!   quasicompactness margins, including a Lasota--Yorke inequality checker
//!   ([`quasicompact`]);
//! * subadditive ergodic optimization over finite measure families, used to
//!   test whether spectral-interval endpoints are realized as Lyapunov
//!   exponents of some ergodic measure ([`jps`]).
//!
//! Everything is deterministic given a seed: identical inputs produce
//! bitwise-identical outputs regardless of thread interleaving.

pub mod base;
pub mod cocycle;
pub mod dichotomy;
pub mod error;
pub mod fixtures;
pub mod jps;
pub mod linalg;
pub mod lyapunov;
pub mod quasicompact;
pub mod selftest;
pub mod spectrum;

pub use error::{Error, Result};
pub use quasicompact::ExtReal;
