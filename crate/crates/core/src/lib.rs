//! Models for deciding whether a power-limited neural recording system can
//! swap accelerator working sets to NAND flash in real time.
//!
//! * [`flash`]: latency, bandwidth and energy of a multi-chip NAND subsystem.
//! * [`accel`]: kernel working sets and SRAM power.
//! * [`em`]: external-memory block-transfer counts with asymmetric weights.
//! * [`feasibility`]: fixed-data-rate operating points and their verdicts.
//! * [`sim`]: discrete-event simulation of the swap traffic on the shared bus.
//! * [`config`]: scenario files.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accel;
pub mod config;
pub mod em;
pub mod error;
pub mod feasibility;
pub mod flash;
pub mod sim;

pub use error::{ModelError, Result};
