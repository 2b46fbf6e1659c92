//! Multi-objective genetic optimization over the surrogates: non-dominated
//! sorting, reference-direction niching, and the covariance infill criterion
//! that picks configurations for high-fidelity validation.

mod evolve;
mod hypervolume;
mod infill;
mod niche;
mod sort;

pub use evolve::{evolve, EvolveReport, MooSettings, Population};
pub use hypervolume::hypervolume;
pub use infill::{infill_select, infill_select_from_matrices, InfillSelection};
pub use niche::{das_dennis, select_survivors, SurvivorSelection};
pub use sort::{dominates, non_dominated_sort, pareto_indices};
