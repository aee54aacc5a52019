//! Non-Markovian relaxation of a damped harmonic oscillator through the
//! pseudomode master equation.
//!
//! The crate is organised bottom-up:
//!
//! - [`bath`]: exponential expansion of the bath correlation function and the
//!   Lorentzian-to-pseudomode mapping.
//! - [`spectral`]: single-excitation dynamical matrix, characteristic
//!   polynomial, its roots, exceptional-point classification and the
//!   combinational Liouvillian spectrum.
//! - [`liouvillian`]: truncated Fock-space Hamiltonian, vectorized Lindblad
//!   superoperator, dense spectrum, steady state and partial trace.
//! - [`dynamics`]: master-equation integration, the coherent-state amplitude
//!   solution and the Born-Markov reduction.
//! - [`mpemba`]: distances to equilibrium, crossing detection and gap sweeps.
//! - [`config`] and [`cli`]: declarative run description and the command
//!   implementations behind the `pseudomode` binary.
//!
//! Frequencies are dimensionless multiples of a reference frequency (usually
//! the oscillator frequency), with `hbar = 1`.

pub mod bath;
pub mod cli;
pub mod config;
pub mod dynamics;
mod error;
pub mod liouvillian;
pub mod linalg;
pub mod mpemba;
pub mod ode;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
