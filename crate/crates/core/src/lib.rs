//! Open-system simulation of single-photon addition and subtraction devices
//! built from a driven three-level atom coupled to a damped cavity mode.
//!
//! Units: γ = 1 and ħ = 1. Joint states use the cavity-major index
//! `3n + k` with atom levels `g = 0`, `s = 1`, `e = 2`.

pub mod channels;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod observables;
pub mod optimizer;
pub mod states;

pub use error::{Error, Result};
