//! Automatic variationally stable finite elements (AVS-FE) for 2D
//! convection-diffusion, with goal-oriented a-posteriori error estimation
//! and goal-driven adaptive refinement.
//!
//! The trial space is globally continuous (C⁰ scalar plus C⁰ or
//! Raviart-Thomas flux), the test space is broken, and optimal test
//! functions are computed element by element from local Riesz problems.
//! The resulting normal-equation system is symmetric positive definite.

pub mod adapt;
pub mod avs;
pub mod bench;
pub mod cli;
pub mod dense;
mod error;
pub mod goal;
pub mod io;
pub mod mesh;
pub mod spaces;

pub use error::{Error, Result};

/// 2D point or vector.
pub type Point = [f64; 2];
