//! Single-excitation simulator for SSH-type and generalized SSH-type coupled
//! qubit chains.
//!
//! The crate builds chain Hamiltonians from the cosine coupling law
//! `J_k = g0 + g1 cos(2πk/p + θ)`, computes winding and Chern numbers, and
//! runs the two dynamical probes of band topology: quench dynamics of a
//! single excitation (center of excitation difference) and adiabatic pumping
//! of an entangled unit-cell state (center of excitation).
//!
//! Energies are in units of `g1`, times in units of `1/g1`.

pub mod dynamics;
pub mod ensemble;
mod error;
pub mod model;
pub mod numerics;
pub mod pump;
pub mod topo;

pub use error::{Error, Result};
pub use numerics::{EigenSystem, HermitianMatrix, StateVector, C64};
