//! Surrogate-assisted structural thickness optimization at desk scale.
//!
//! The crate wires together a synthetic plane-stress finite-element solver
//! standing in for a commercial FEA code, POD-GPR surrogates of the stress
//! tensor fields, a multi-objective genetic optimizer with a covariance-based
//! infill criterion, constrained Bayesian optimization over the discrete
//! thickness domain with ILP rounding and a coordinate-sweep local search,
//! and an ILP-driven hierarchical refinement of the thickness parameterization.
//!
//! Entry points:
//! * [`model::build_demo_model`] builds the demo hull and its load cases.
//! * [`model::solve_hifi`] runs the high-fidelity solve for one configuration.
//! * [`rom::surrogate_fit`] / [`rom::SurrogateModel::predict_qois`] fit and
//!   query the POD-GPR surrogates.
//! * [`pipeline::run`] drives the full outer/inner optimization loop.

pub mod criteria;
pub mod error;
pub mod ilp;
pub mod model;
pub mod moo;
pub mod pipeline;
pub mod reparam;
pub mod rom;
pub mod sbo;
pub mod util;

pub use error::{Error, Result};
