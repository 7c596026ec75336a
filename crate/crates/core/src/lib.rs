//! Polynomial chaos surrogates built from under-resolved Monte Carlo
//! radiation-transport tallies.
//!
//! The crate is organised bottom-up:
//!
//! * [`transport`]: analog Monte Carlo for an absorption-only slab and its
//!   closed-form transmittance.
//! * [`polybasis`]: Legendre chaos basis on `[-1, 1]^d` (total-degree
//!   multi-indices, norms, Gauss-Legendre rules).
//! * [`nisp`]: spectral projection from noisy tallies, coefficient
//!   covariance with noise separation, unbiased variance, expansion trim,
//!   response variability and Sobol indices.
//! * [`costmodel`]: coefficient variance under a re-sampling cost model.
//! * [`oracle`]: exact reference statistics for the slab problem.
//! * [`experiments`]: repetition studies, report files and the `uqpc` CLI
//!   plumbing.

pub mod costmodel;
pub mod error;
pub mod experiments;
pub mod nisp;
pub mod oracle;
pub mod polybasis;
pub mod transport;

pub use error::{Result, UqError};
