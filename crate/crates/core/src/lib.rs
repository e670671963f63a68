//! Density-matrix simulation of quantum teleportation assisted by coherent
//! superposition of processes: superposed paths and the quantum switch.
//!
//! Subsystems are ordered control-major, `C ⊗ A ⊗ A' ⊗ B`.

pub mod analysis;
pub mod channels;
pub mod error;
pub mod protocol;
pub mod qcore;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
