//! Simulation engine for growing matter-qubit graph states by interfering
//! cavity-emitted photons in a four-port beam-splitter network.
//!
//! The crate is organized around the protocol's layers: [`qstate`] is the
//! dense tensor-product state engine, [`optics`] composes beam-splitter
//! networks into mode unitaries, [`jumpsim`] runs the quantum-jump
//! continuous-measurement analysis, [`graphstate`] tracks graphs with
//! local-Clifford corrections, [`fusion`] drives the repeat-until-success
//! growth protocol, and [`planner`] counts resources and schedules
//! just-in-time edge creation.

pub mod error;
pub mod jumpsim;
pub mod optics;
pub mod qstate;
pub mod quad;

pub use error::{Error, Result};
