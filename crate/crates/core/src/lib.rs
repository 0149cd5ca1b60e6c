//! Galerkin/spectral solver for the compressible Navier–Stokes system in a
//! periodic channel with slip walls of friction type, together with the
//! verification harness that checks computed runs against the energy
//! balance, the weak momentum-and-energy inequality, the renormalised
//! continuity equation and the friction law.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod archive;
pub mod basis;
pub mod config;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod fixed_point;
pub mod friction;
pub mod geometry;
pub mod mms;
pub mod model;
pub mod momentum;
pub mod params;
pub mod quadrature;
pub mod regularize;
pub mod run;
pub mod spectral;
pub mod sweep;
pub mod trig;

pub use archive::{read_archive, ArchiveSummary, Verification, SCHEMA};
pub use basis::{GalerkinBasis, InteriorModes, VelocityCoeffs};
pub use config::RunConfig;
pub use diagnostics::{EnergyLedger, ResidualReport};
pub use error::{Error, Result};
pub use fixed_point::{
    fixed_point_solve, Coupling, FixedPointSolution, IterationRecord, SolverOptions, Trajectory,
};
pub use friction::FrictionReg;
pub use geometry::{Geometry, Wall};
pub use model::Model;
pub use params::{BodyForce, FluidParams, Sources};
pub use regularize::{regularize_initial_data, RegularizationDistances, RegularizedData};
pub use run::{mms_study, run_simulation, simulate, verify_archive, MmsStudy, RunOutcome};
pub use spectral::{ScalarSpace, ScalarSpectralField};
pub use sweep::{run_sweep, run_sweep_to, SweepParam, SweepReport};
