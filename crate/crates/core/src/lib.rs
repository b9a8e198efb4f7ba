//! Space-time boundary elements for the heat equation on moving planar domains.
//!
//! The moving domain `Ω_t = κ(t, Ω₀)` is described analytically
//! ([`geometry`]); the heat kernel and its velocity-corrected traces live in
//! [`kernels`]; [`quadrature`] discretises the lateral boundary `Σ_T` into
//! time slabs times angular panels; [`operators`] assembles the causal
//! operator matrices; [`potentials`] evaluates layer potentials off the
//! boundary; [`solve`] marches the integral equations forward in time; and
//! [`verify`] holds the independent oracles used to check the operator
//! identities. [`config`], [`output`] and [`cli`] run the `solve`, `verify`
//! and `converge` experiments of the command line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod operators;
pub mod output;
pub mod potentials;
pub mod quadrature;
pub mod solve;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{BoundarySample, Family, PointClass, TubeGeometry};
pub use kernels::{KernelPoint, TracedKernel};
pub use operators::{CalderonBlocks, CausalMatrix};
pub use quadrature::{QuadratureOptions, SpaceTimeMesh, VolumeQuadrature};
pub use solve::{BieSolution, Formulation, Problem, Variant};
