//! Co-simulation of self-organizing oscillator networks driving free-fermion spin chains.
//!
//! A classical Kuramoto (or Stuart-Landau) network sets the site-local transverse
//! field `g_i(t) = G cos θ_i(t)` of a spin chain. The chain is solved exactly in its
//! free-fermion form: a real orthogonal Majorana propagator for the Ising chain and a
//! unitary single-particle propagator for the XX chain.

pub mod cosim;
pub mod error;
pub mod experiments;
pub mod fermion;
pub mod io;
pub mod oscillator;

pub use error::{Error, Result, Stage};
