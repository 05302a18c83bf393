//! Spectral Monte Carlo toolkit for controlled semilinear stochastic heat
//! equations on boxes: simulation, spike variations, regression adjoints and
//! stochastic maximum-principle checks.

pub mod adjoint;
pub mod catalog;
pub mod config;
pub mod control;
pub mod cost;
pub mod error;
pub mod forward;
pub mod io;
pub mod noise;
pub mod nonlinearity;
pub mod rng;
pub mod runner;
pub mod spectral;
pub mod stats;
pub mod time;
pub mod variation;

pub use error::{Error, Result};
