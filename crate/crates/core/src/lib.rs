//! Simulation and training harness for variational regression on Kerr
//! parametric oscillators (KPOs), with a qubit circuit baseline.

pub mod adiabatic;
pub mod baseline;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod rng;

pub use error::{Error, Result};
