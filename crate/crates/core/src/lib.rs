//! Numerical study of a Riesz-forced vorticity equation in the scaling
//! variables `R = r^α` and `θ`.
//!
//! The crate provides the radial kernel and tail operators, the reduced
//! leading-order model with its exact solution, a mode-by-mode elliptic
//! solver, a solver for the full transport-plus-forcing system, and the fits
//! and scaling studies used to compare them.

pub mod diagnostics;
pub mod elliptic;
pub mod evolution;
pub mod fd;
pub mod grid;
pub mod kernel;
pub mod model;
pub mod profiles;
pub mod quadrature;
pub mod selfcheck;
pub mod spectral;

pub use grid::{AngularGrid, Field2D, Parity, RadialGrid, RadialProfile, SpacingKind, l2_norm, project_mode, sup_norm};
pub use kernel::{KernelEval, KernelKind, gamma_kernel};
