//! Single-objective penalized-mass minimization over the surrogates:
//! Bayesian optimization with three rotating acquisitions, linear incumbent
//! and VCG bounds, assignment-program rounding for the discrete domain, and
//! the principal dimensions local search.

mod acquisition;
mod bo;
mod maximize;
mod pds;
mod rounding;

pub use acquisition::{acquisition, acquisition_grad_mu_sigma, AcquisitionConfig, AcquisitionKind};
pub use bo::{bo_run, BoOutcome, BoSettings, BoTraceRow};
pub use maximize::maximize_acquisition;
pub use pds::{pds_run, PdsOutcome, PdsSettings};
pub use rounding::{ilp_round, naive_round};

use crate::criteria::{self, PenaltyConfig};
use crate::error::Result;
use crate::model::{Configuration, HullModel, ParameterSpace};
use crate::rom::SurrogateModel;

/// Scalar objective a single-objective optimizer minimizes; the production
/// implementation evaluates the penalized mass through the field surrogate.
pub trait Objective {
    fn eval(&self, config: &Configuration) -> Result<f64>;
}

/// Linear constraint data of the mass optimization problem, in thickness
/// units (mm).
#[derive(Debug, Clone)]
pub struct LinearConstraints {
    /// Linear density per parameter (t/mm).
    pub d: Vec<f64>,
    /// VCG row coefficients `(vcg_i - vcg_crit) * d_i`.
    pub vcg_coeff: Vec<f64>,
    /// VCG row right-hand side `(vcg_crit - vcg_fixed) * m_fixed`.
    pub vcg_rhs: f64,
    pub m_fixed: f64,
}

const LIN_TOL: f64 = 1e-9;

impl LinearConstraints {
    pub fn from_problem(space: &ParameterSpace, pen: &PenaltyConfig) -> Self {
        let d: Vec<f64> = space.params.iter().map(|p| p.linear_density).collect();
        let vcg_coeff: Vec<f64> = space
            .params
            .iter()
            .map(|p| (p.vcg - pen.vcg_crit) * p.linear_density)
            .collect();
        Self {
            d,
            vcg_coeff,
            vcg_rhs: (pen.vcg_crit - pen.vcg_fixed) * pen.m_fixed,
            m_fixed: pen.m_fixed,
        }
    }

    /// VCG half-space test (the hard constraint of the mass problem).
    pub fn vcg_ok(&self, x: &[f64]) -> bool {
        let lhs: f64 = self.vcg_coeff.iter().zip(x).map(|(a, v)| a * v).sum();
        lhs <= self.vcg_rhs + LIN_TOL
    }

    /// Incumbent mass bound: a configuration can only beat the incumbent if
    /// its bare plate mass does not already exceed the incumbent objective.
    pub fn mass_ok(&self, x: &[f64], f_incumbent: f64) -> bool {
        if !f_incumbent.is_finite() {
            return true;
        }
        let lhs: f64 = self.d.iter().zip(x).map(|(a, v)| a * v).sum();
        self.m_fixed + lhs <= f_incumbent + LIN_TOL
    }
}

/// Penalized-mass objective backed by the POD-GPR field surrogate.
pub struct SurrogateObjective<'a> {
    pub surrogate: &'a SurrogateModel,
    pub model: &'a HullModel,
    pub space: &'a ParameterSpace,
    pub pen: &'a PenaltyConfig,
}

impl Objective for SurrogateObjective<'_> {
    fn eval(&self, config: &Configuration) -> Result<f64> {
        let qois = self.surrogate.predict_qois(
            self.model,
            self.space,
            self.pen,
            std::slice::from_ref(config),
        )?;
        Ok(criteria::penalized_mass(&qois[0], self.pen))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParameterDef;

    #[test]
    fn vcg_half_space_matches_the_exact_ratio_constraint() {
        // two params with distinct VCGs: the linearized row must agree with
        // the exact ratio form VCG(x) <= vcg_crit
        let space = ParameterSpace {
            params: vec![
                ParameterDef {
                    index: 0,
                    label: "low".into(),
                    patch_ids: vec![0],
                    domain: vec![1.0, 10.0],
                    parent: None,
                    linear_density: 2.0,
                    vcg: 2.0,
                    default_value: 1.0,
                },
                ParameterDef {
                    index: 1,
                    label: "high".into(),
                    patch_ids: vec![1],
                    domain: vec![1.0, 10.0],
                    parent: None,
                    linear_density: 1.5,
                    vcg: 12.0,
                    default_value: 1.0,
                },
            ],
            version: 0,
        };
        let mut pen = PenaltyConfig::example();
        pen.m_fixed = 100.0;
        pen.vcg_fixed = 6.0;
        pen.vcg_crit = 6.5;
        let patches: Vec<crate::model::Patch> = space
            .params
            .iter()
            .map(|p| crate::model::Patch {
                id: p.index,
                element_ids: vec![p.index],
                linear_density_coeff: p.linear_density,
                vcg: p.vcg,
            })
            .collect();
        let constraints = LinearConstraints::from_problem(&space, &pen);
        for x in [
            [1.0, 1.0],
            [10.0, 1.0],
            [1.0, 10.0],
            [10.0, 10.0],
            [5.0, 4.0],
        ] {
            let config = Configuration::new(x.to_vec());
            let exact =
                criteria::structural_vcg(&config, &space, &patches, &pen) <= pen.vcg_crit + 1e-12;
            assert_eq!(constraints.vcg_ok(&x), exact, "x = {x:?}");
        }
    }
}
