//! Quantum-probability (Hilbert space multidimensional) models for
//! collections of contingency tables, with classical baselines and
//! consistency diagnostics.

pub mod error;
pub mod baselines;
pub mod diagnostics;
pub mod estimation;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod model;
pub mod quantum;
pub mod report;
pub mod tables;

pub use error::{Error, Result};
