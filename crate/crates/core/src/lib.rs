//! Adapted complex structures on tubes in tangent bundles, computed by
//! continuing the geodesic flow to imaginary time.
//!
//! The pipeline: a [`geometry::MetricModel`] supplies analytic metrics, the
//! [`hamiltonian_flow`] integrates `Φ_σ` and its pushforward for complex σ,
//! [`lagrangian`] turns pushed vertical spaces into the tensor `J`,
//! [`jacobi`] gives an independent route through Jacobi fields, and
//! [`verify`] checks the resulting structure against its defining identities.

pub mod error;
pub mod expr;
pub mod geometry;
pub mod hamiltonian_flow;
pub mod holomorphic_ext;
pub mod jacobi;
pub mod jet;
pub mod lagrangian;
pub mod linalg;
pub mod pade;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{catalog, MetricModel, ModelParams, PhasePoint};
pub use hamiltonian_flow::{flow, FlowOptions, FlowResult, SigmaPath};
