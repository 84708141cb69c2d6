//! Soft policy optimization with a dual-track advantage estimator.
//!
//! Everything numeric lives here: dense networks with explicit gradients,
//! the TD(λ) estimator family (GAE, the TD-weighted variant, and their
//! dual-track combination against a lagged value snapshot), diagonal
//! Gaussian policies, desk-scale environments, the training loop, and the
//! numerical checks for the identities the algorithm rests on.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats, the CLI,
//! and anything touching the filesystem live in the companion `spod-cli`
//! crate. All arithmetic is `f64`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod advantage;
pub mod envs;
pub mod loss;
pub mod nn;
pub mod policy;
pub mod rollout;
pub mod theory;
pub mod trainer;

mod num;

use alloc::string::String;

/// Errors are split by how the caller should react: `Config` and `Usage`
/// are programming or input mistakes, `Numeric` means a computation left
/// the finite-f64 domain and the result cannot be trusted.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    for &v in values {
        if !v.is_finite() {
            return Err(Error::Numeric(alloc::format!("non-finite value in {what}")));
        }
    }
    Ok(())
}
