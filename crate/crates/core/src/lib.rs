//! Kinetic transport with a fat-tailed equilibrium and a biased turning
//! operator, together with its fractional advection-diffusion limit.

pub mod collision;
pub mod equilibrium;
pub mod error;
pub mod fractional;
pub mod grid;
pub mod harness;
pub mod particles;
pub mod quadrature;
pub mod solvers;
pub mod special;
pub mod symbols;
pub mod vector;

pub use error::{Error, Result};
