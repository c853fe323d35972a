//! Quantum kicked rotor at resonance under momentum measurements whose
//! waiting times follow a heavy-tailed (Levy) law.
//!
//! The crate provides two independent evolution engines (closed-form
//! transition kernels and full truncated-lattice wavefunction evolution), a
//! deterministic master-equation propagator, the closed-form exponent law for
//! the averaged variance, and the fitting machinery to compare simulated
//! ensembles against it. Everything is reproducible bit-for-bit from a master
//! seed, independent of thread count.

pub mod analysis;
pub mod bessel;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod evolution;
pub mod levy;
pub mod output;
pub mod rng;

pub use error::{Error, Result};
