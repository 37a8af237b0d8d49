//! Certified numerics for guessing-game uncertainty relations and the
//! entanglement recovery they imply.
//!
//! Module map:
//! - [`linalg`]: labeled states and operators, eigen/sqrt/fidelity primitives.
//! - [`qops`]: generalized Paulis, Fourier basis, copy and phase isometries, test states.
//! - [`discrimination`]: optimal guessing probabilities with primal/dual certificates.
//! - [`recovery`]: coherent measurements, the recovery circuit, recovery and Q fidelities.
//! - [`relations`]: one checker per inequality, producing [`relations::RelationReport`]s.
//! - [`cli`]: the `qguess` command-line front end.

pub mod error;
pub mod linalg;
pub mod qops;
pub mod discrimination;
pub mod enclosure;
pub mod recovery;
pub mod relations;
pub mod cli;

pub use enclosure::Enclosure;
pub use error::{Error, Result};
