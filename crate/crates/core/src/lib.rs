//! Statevector simulation of chaotic dynamics on an imperfect quantum computer.
//!
//! The crate is organised bottom-up:
//!
//! * [`state`] holds the amplitude vector, gate kernels and the per-gate noise model.
//! * [`circuit`] builds reusable circuits (QFT, ripple-carry adders, polynomial phases).
//! * [`maps`] assembles the Arnold cat map and kicked-rotator steps out of those circuits.
//! * [`classical`] provides ground truth: exact lattice maps, float ensembles and dense
//!   circuit matrices.
//! * [`imperfections`] models the static imperfections of an isolated register and its
//!   melting into quantum chaos.
//! * [`experiment`] binds everything into reproducible figure runs.

// Linked for its LAPACK symbols only.
extern crate openblas_src;

pub mod circuit;
pub mod classical;
pub mod dense;
mod error;
pub mod experiment;
pub mod fit;
pub mod imperfections;
mod lapack;
pub mod maps;
pub mod rng;
pub mod state;

pub use circuit::{Circuit, GateCount};
pub use error::{Error, Result};
pub use rng::Stream;
pub use state::{GateOp, NoiseSpec, RegisterLayout, StateVector};
