//! Reduced-order stress surrogates: POD compression of the snapshot fields
//! and shared-kernel vector-valued GP regression of the reduced coefficients,
//! assembled into one surrogate per (load case, stress component) plus two
//! scalar deflection regressors.

mod crossval;
mod database;
mod gpr;
mod pod;
mod surrogate;

pub use crossval::{cross_validate, CvCell};
pub use database::{DbEntry, Phase, SnapshotDatabase};
pub use gpr::{gpr_fit, log_likelihood_and_grad, GprConfig, GprModel};
pub use pod::{pod_fit, policy_rank, PodBasis, RankPolicy};
pub use surrogate::{surrogate_fit, FieldSurrogate, SurrogateModel};
