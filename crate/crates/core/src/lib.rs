//! Numerical laboratory for Dirichlet L-functions at the central point.
//!
//! The library is organized around a prime modulus `q`.  A [`arith::PrimeContext`]
//! holds the discrete-log and inverse tables of `(ℤ/qℤ)*`; on top of it sit
//! Dirichlet characters and their Gauss-sum root numbers ([`characters`]),
//! central values `L(1/2,χ)` computed through a smoothed approximate functional
//! equation with an independent Hurwitz-zeta oracle ([`central`]),
//! hyper-Kloosterman sums ([`kloosterman`]), the Iwaniec–Sarnak mollifier in
//! exact rational arithmetic ([`mollifier`]), weighted/mollified/smoothed
//! moment computations ([`moments`]), smooth bump functions on ℝ/ℤ ([`bumps`]),
//! and restricted non-vanishing counts ([`nonvanish`]).
//!
//! All family reductions are deterministic: per-character work is collected in
//! index order and folded sequentially with compensated summation, so results
//! are bit-identical across runs and worker counts.

pub mod arith;
pub mod bumps;
pub mod cache;
pub mod central;
pub mod characters;
pub mod kloosterman;
pub mod mollifier;
pub mod moments;
pub mod nonvanish;
pub mod sieve;
pub mod special;
pub mod util;

use thiserror::Error;

pub use num_complex::Complex64;

/// Errors shared by all modules.  The CLI maps these onto exit codes:
/// usage/precondition failures → 2, resource guards → 3, everything else → 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not an odd prime")]
    NotPrime(u64),
    #[error("modulus {q} exceeds the configured cap {cap}")]
    ModulusCap { q: u64, cap: u64 },
    #[error("resource guard exceeded: {0}")]
    Resource(String),
    #[error("{0} is divisible by the modulus")]
    NotAUnit(u64),
    #[error("the principal character is not primitive")]
    NotPrimitive,
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal consistency failure: {0}")]
    Inconsistency(String),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("cache rejected: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
