//! Numerical laboratory for the potential form of Lagrangian mean curvature
//! flow, `∂u/∂t = Σᵢ arctan λᵢ(D²u)`, on two-convex data.

pub mod commands;
pub mod config;
pub mod error;
pub mod expander;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod inequality;
pub mod regularization;
pub mod spectral;

pub use error::{Error, Result};
