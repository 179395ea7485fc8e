//! Numerical laboratory for a reaction-diffusion system with two competing
//! predators feeding on one prey: constant equilibria, linear invasion
//! speeds, principal eigenvalues, method-of-lines simulation, front tracking
//! and Lyapunov/nonlocal-pulling diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod eigensolver;
pub mod error;
pub mod front_analysis;
pub mod kinetics;
pub mod linear_speeds;
pub mod optimize;
pub mod pde_sim;

pub use error::{Error, Result};
pub use kinetics::{Densities, ModelParams};
