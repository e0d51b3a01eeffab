//! Discrete-time Hawkes processes.
//!
//! Arrivals `ξ_n ∈ {0, 1}` occur with conditional probability
//! `λ_n = a_0 + Σ_{i<n} a_{n-i} ξ_i`, and `H_n = ξ_1 + ... + ξ_n` counts them.
//! The crate provides
//!
//! - [`kernel`]: validated exciting functions `(a_i)`,
//! - [`moments`]: the `b_n` recursion, marginal and limiting arrival
//!   probabilities, CLT variance,
//! - [`exact`]: exact distributions by enumerating every history,
//! - [`simulate`]: seeded, worker-count-independent Monte Carlo,
//! - [`ldp`]: scaled log-MGFs, the `L`/`U` envelopes, Legendre transforms and
//!   Chernoff bounds,
//! - [`risk`]: the surplus process with Hawkes claims, fan charts and ruin
//!   probabilities,
//! - [`cli`]: the `dthp` command line.

pub mod cli;
pub mod error;
pub mod exact;
pub mod kernel;
pub mod ldp;
pub mod moments;
pub mod optimize;
pub mod risk;
pub mod rng;
pub mod simulate;
pub mod workers;

pub use error::{Error, Result};
pub use kernel::{ExcitingFunction, KernelForm, KernelSpec};
