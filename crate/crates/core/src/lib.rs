//! Numerical solver for self-dual Chern-Simons multi-vortex equations on
//! conformally flat background metrics `γ_ij = b(x,y) δ_ij`.
//!
//! The library computes the regular part `u` of the singularity split
//! `w = u₀ + u`, where `u₀` carries the logarithmic vortex singularities in
//! closed form, by damped Newton iteration on the reduced elliptic equation
//! and, independently, by nonlinear conjugate-gradient minimization of the
//! associated energy functional. Physical observables (magnetic flux, BPS
//! energy, spin, temporal gauge potential, decay exponent) are reconstructed
//! from the converged field. All quantities are in rescaled dimensionless
//! units `e = v = κ = 1`.

pub mod config;
pub mod error;
pub mod grid;
pub mod metric;
pub mod observables;
pub mod quad;
pub mod radial;
pub mod run;
pub mod solver;
pub mod vortex;

pub use config::{RunConfiguration, RunReport};
pub use error::Error;
pub use grid::{GridSpec, ScalarGrid};
pub use metric::{BoundsCertificate, ConformalFactor};
pub use observables::ObservableSet;
pub use radial::{RadialProblem, RadialProfile};
pub use run::{RunOutput, VerifySummary};
pub use solver::{Method, SolveOutcome, SolveReport, SolveSettings};
pub use vortex::{BackgroundFields, Vortex, VortexConfiguration};

/// Crate version string embedded into run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
