//! Simulation of laser-written waveguide tapers: index inscription, guided
//! modes, beam propagation and fiber coupling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod field;
pub mod inscription;
pub mod io;
mod linalg;
pub mod mode;
pub mod propagation;

pub use error::{Error, Result};
