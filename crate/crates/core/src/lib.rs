//! Spectral Galerkin core for the stochastic incompressible third-grade fluid
//! equations with Navier-slip walls.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: the divergence-free eigenbasis, pseudo-spectral evaluation of
//! the constitutive operators, truncated cylindrical noise, the cut-off
//! Euler–Maruyama integrator and the estimate-verification studies built on
//! top of it. File formats, ensembles and the command line live in the
//! `thirdgrade` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod basis;
pub mod diagnostics;
pub mod dynamics;
pub mod field;
pub mod grid;
pub mod noise;
pub mod operators;
pub mod params;
pub mod rng;

pub use basis::{DomainKind, DomainSpec, GalerkinBasis, Mode};
pub use diagnostics::{EnsembleReport, PathSummary, TrajectoryRecord};
pub use dynamics::{CutoffFn, CutoffMode, Forcing, Integrator, SimError, SimState, System};
pub use field::{NormReport, PhysicalField, SpectralField};
pub use noise::{NoiseKind, NoiseModel, WienerState};
pub use params::{CutoffConfig, FluidParams, ParamError, RunConfig};
