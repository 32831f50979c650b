//! Simulation of charge-recovery associative toggle memory.
//!
//! - [`adiabatic`]: closed-form energy of RC charging for each supply shape.
//! - [`transient`]: fixed-step trapezoidal simulation of a lumped matchline
//!   with energy quadrature, plus the two-cycle recovery protocol.
//! - [`toggle`]: behavioral conditional-toggle cell and driver gate.
//! - [`machine`]: word-parallel toggle memory with per-instruction energy
//!   ledger and program inversion.

pub mod adiabatic;
pub mod error;
pub mod machine;
pub mod toggle;
pub mod transient;

pub use error::{MachineError, ModelError, SimError};
