//! Random pullback attractors of a stochastic reaction-diffusion lattice with
//! time-dependent coefficients and multiplicative Stratonovich noise.
//!
//! The stochastic equation is conjugated by the stationary Ornstein-Uhlenbeck
//! process into a random ODE on a truncated lattice, integrated pathwise.

pub mod attractor;
pub mod cocycle;
pub mod model;
pub mod noise;
pub mod seeds;
pub mod config;
pub mod runner;
