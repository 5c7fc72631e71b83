//! Optimal steering of Markovian network flows.
//!
//! * [`finite_bridge`] solves the discrete Schrödinger bridge between two
//!   marginals over a finite horizon.
//! * [`stationary`] finds the kernel closest in entropy rate to a prior that
//!   leaves a prescribed law invariant, and checks reversibility.
//! * [`cooling`] builds Boltzmann laws and Metropolis kernels and runs the
//!   fast and asymptotic cooling pipelines.
//! * [`graph`], [`matrix`] and [`entropy`] hold the substrate; [`simulate`]
//!   is a Monte-Carlo harness for validating flows empirically.

pub mod cooling;
pub mod entropy;
pub mod error;
pub mod finite_bridge;
pub mod graph;
pub mod matrix;
pub mod simulate;
pub mod stationary;

pub use error::{Error, Result};
pub use graph::Graph;
pub use matrix::{Distribution, NonnegMatrix};
