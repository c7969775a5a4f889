//! Spectral simulation of the stochastic viscous wave equation
//! `u_tt + √(−Δ) u_t − Δu = f(u) Ẇ` on periodic boxes, with the kernel
//! identities, admissibility tests and Hölder estimators around it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fsi;
pub mod grid;
pub mod kernels;
pub mod noise;
pub mod quadrature;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Field, Grid, GridSpec, SpectralField};
pub use kernels::{KernelFamily, KernelKind};
pub use noise::{NoiseIncrement, NoiseStream, RngPolicy, SeedPath};
pub use rustfft::num_complex::Complex64;
pub use solver::{
    InitialData, InitialPreset, Nonlinearity, NonlinearityPreset, SimulationConfig, SolverState,
    TrajectoryEnsemble,
};
