//! Zero-forcing (ZF) precoding analysis for full-dimensional massive MIMO.
//!
//! The crate has two pipelines that are meant to be checked against each other:
//!
//! * an exact Monte-Carlo path: draw a finite-multipath channel for a
//!   uniform linear or planar array, build the ZF precoder and evaluate the
//!   per-UE SNR and the ergodic sum spectral efficiency ([`precoding`]);
//! * a closed-form path: approximate `(HH^H)^{-1}` with a truncated Neumann
//!   series around `E{HH^H}` ([`neumann`]) and take expectations of the
//!   order-2 expansion in terms of the per-UE spatial covariances
//!   ([`analytics`]).
//!
//! Everything here is pure computation on `core` + `alloc`. File formats,
//! experiment drivers and the CLI live in the `fdzf` companion crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` is used on purpose to reject NaN along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analytics;
pub mod channel;
mod error;
pub mod linalg;
pub mod neumann;
pub mod precoding;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};

#[cfg(test)]
pub(crate) mod testutil;
