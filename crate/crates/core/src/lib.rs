//! Model selection for quantum state tomography.
//!
//! Standard tomography assumes every trial samples the same state. This
//! crate fits that assumption as one statistical model among several
//! (drifting source, setting-dependent source) and ranks the candidates
//! with the Akaike information criterion, so that a failed assumption is
//! detected instead of silently averaged away.

pub mod likelihood;
pub mod linalg;
pub mod models;
pub(crate) mod optim;
pub mod qstate;
pub mod qubit_analytic;
pub mod scalar;
pub mod simulator;
pub mod twoqubit;

pub use scalar::Real;

/// Double-precision aliases; the working types for everything in the CLI.
pub type BlochVector64 = qstate::BlochVector<f64>;
pub type DensityMatrix64 = qstate::DensityMatrix<f64>;
pub type FittedModel64 = models::FittedModel<f64>;
pub type AicReport64 = models::AicReport<f64>;
pub type SourceConfig64 = simulator::SourceConfig<f64>;
pub type PowerEstimate64 = simulator::PowerEstimate<f64>;

/// Single-precision aliases for memory-bound sweeps.
pub type BlochVector32 = qstate::BlochVector<f32>;
pub type DensityMatrix32 = qstate::DensityMatrix<f32>;
pub type FittedModel32 = models::FittedModel<f32>;
pub type AicReport32 = models::AicReport<f32>;
pub type SourceConfig32 = simulator::SourceConfig<f32>;
pub type PowerEstimate32 = simulator::PowerEstimate<f32>;
