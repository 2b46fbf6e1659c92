use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::acquisition::{AcquisitionConfig, AcquisitionKind};
use super::maximize::maximize_acquisition;
use super::rounding::ilp_round;
use super::{LinearConstraints, Objective};
use crate::error::{Error, Result};
use crate::model::{Configuration, ParameterSpace};
use crate::rom::{gpr_fit, GprConfig, GprModel};
use crate::util::rng::stream;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoSettings {
    pub max_iters: usize,
    /// Wall-clock budget per run; the reference setup uses 5 minutes.
    pub time_limit_secs: Option<f64>,
    pub acquisition: AcquisitionConfig,
    pub start_kind: AcquisitionKind,
    /// Multi-start count of the acquisition maximizer.
    pub n_starts: usize,
    /// How many top candidates to hand to high-fidelity validation.
    pub validation_count: usize,
    /// Re-optimize the GP hyperparameters every this many insertions; other
    /// iterations refit only the solve with frozen hyperparameters.
    pub hyper_refresh: usize,
    pub max_perturbations: usize,
    pub seed: u64,
    pub gpr: GprConfig,
}

impl Default for BoSettings {
    fn default() -> Self {
        Self {
            max_iters: 200,
            time_limit_secs: Some(300.0),
            acquisition: AcquisitionConfig::default(),
            start_kind: AcquisitionKind::Nlcb,
            n_starts: 12,
            validation_count: 3,
            hyper_refresh: 25,
            max_perturbations: 50,
            seed: 0,
            gpr: GprConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoTraceRow {
    pub iter: usize,
    pub acquisition: AcquisitionKind,
    pub config: Configuration,
    pub f_value: f64,
    pub incumbent_f: f64,
}

#[derive(Debug, Clone)]
pub struct BoOutcome {
    /// Evaluated configurations ranked by objective, best first, truncated
    /// to the validation count.
    pub candidates: Vec<(Configuration, f64)>,
    pub trace: Vec<BoTraceRow>,
    pub incumbent: Configuration,
    pub incumbent_f: f64,
    /// True when the run stopped because no unvisited feasible candidate was
    /// left, rather than on budget.
    pub exhausted: bool,
    pub evaluations: usize,
}

/// Constrained Bayesian optimization over the discrete domain.
///
/// An internal GP models the scalar objective over normalized inputs. Each
/// iteration maximizes the current acquisition inside the box intersected
/// with the incumbent-mass and VCG half-spaces, rounds to an unvisited
/// feasible configuration (duplicates resolved by a small assignment
/// program), evaluates the objective, and refits. The incumbent bound
/// tightens whenever the best feasible value improves, and the acquisition
/// rotates after `switch_patience` non-improving iterations.
pub fn bo_run(
    objective: &dyn Objective,
    space: &ParameterSpace,
    constraints: &LinearConstraints,
    seeds: &[(Configuration, f64)],
    settings: &BoSettings,
) -> Result<BoOutcome> {
    if seeds.is_empty() {
        return Err(Error::Data("bo needs at least one seed evaluation".into()));
    }
    let deadline = settings
        .time_limit_secs
        .map(|s| Instant::now() + Duration::from_secs_f64(s));
    let d = space.n_params();

    let mut visited: BTreeSet<Vec<u64>> = seeds.iter().map(|(c, _)| c.key()).collect();
    let mut x_rows: Vec<Vec<f64>> = seeds.iter().map(|(c, _)| space.normalize(c)).collect();
    let mut y_rows: Vec<f64> = seeds.iter().map(|(_, f)| *f).collect();

    let (mut incumbent, mut incumbent_f) = seeds
        .iter()
        .filter(|(c, _)| constraints.vcg_ok(&c.values))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, f)| (c.clone(), *f))
        .ok_or_else(|| Error::Infeasible("no feasible incumbent among the seeds".into()))?;

    let mut rng = stream(settings.seed, "bo-run", &[d as u64]);
    let fit_full = |x_rows: &[Vec<f64>], y_rows: &[f64], seed: u64| -> Result<GprModel> {
        let x = DMatrix::from_fn(x_rows.len(), d, |i, j| x_rows[i][j]);
        let y = DMatrix::from_fn(y_rows.len(), 1, |i, _| y_rows[i]);
        gpr_fit(
            &x,
            &y,
            &GprConfig {
                seed,
                ..settings.gpr
            },
        )
    };
    let mut gp = fit_full(&x_rows, &y_rows, settings.seed)?;

    let mut kind = settings.start_kind;
    let mut stall = 0usize;
    let mut inserts_since_hyper = 0usize;
    let mut exhausted = false;
    let mut evaluated: Vec<(Configuration, f64)> = Vec::new();
    let mut trace = vec![BoTraceRow {
        iter: 0,
        acquisition: kind,
        config: incumbent.clone(),
        f_value: incumbent_f,
        incumbent_f,
    }];

    for iter in 0..settings.max_iters {
        if let Some(dl) = deadline {
            if Instant::now() >= dl {
                break;
            }
        }
        let incumbent_norm = space.normalize(&incumbent);
        let x_bar = match maximize_acquisition(
            &gp,
            kind,
            &settings.acquisition,
            incumbent_f,
            space,
            constraints,
            incumbent_f,
            Some(&incumbent_norm),
            settings.seed ^ (iter as u64).wrapping_mul(0x9e37_79b9),
            settings.n_starts,
        ) {
            Ok(x) => x,
            Err(Error::Exhausted(_)) => {
                exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let candidate = match ilp_round(
            &x_bar,
            space,
            constraints,
            incumbent_f,
            &visited,
            &mut rng,
            settings.max_perturbations,
        ) {
            Ok(c) => c,
            Err(Error::Exhausted(_)) | Err(Error::Infeasible(_)) => {
                exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        };

        let f = objective.eval(&candidate)?;
        visited.insert(candidate.key());
        x_rows.push(space.normalize(&candidate));
        y_rows.push(f);
        evaluated.push((candidate.clone(), f));

        let improved = constraints.vcg_ok(&candidate.values) && f < incumbent_f - 1e-12;
        if improved {
            incumbent = candidate.clone();
            incumbent_f = f;
            stall = 0;
        } else {
            stall += 1;
            if stall >= settings.acquisition.switch_patience {
                kind = kind.next();
                stall = 0;
            }
        }

        inserts_since_hyper += 1;
        gp = if inserts_since_hyper >= settings.hyper_refresh {
            inserts_since_hyper = 0;
            fit_full(&x_rows, &y_rows, settings.seed ^ iter as u64)?
        } else {
            let x = DMatrix::from_fn(x_rows.len(), d, |i, j| x_rows[i][j]);
            let y = DMatrix::from_fn(y_rows.len(), 1, |i, _| y_rows[i]);
            GprModel::from_parts(
                x,
                y,
                gp.log_sigma2,
                gp.log_length_scales.iter().copied().collect(),
                gp.log_noise,
            )?
        };

        trace.push(BoTraceRow {
            iter: iter + 1,
            acquisition: kind,
            config: candidate,
            f_value: f,
            incumbent_f,
        });
    }

    evaluated.sort_by(|a, b| a.1.total_cmp(&b.1));
    evaluated.truncate(settings.validation_count);
    let evaluations = trace.len() - 1;
    Ok(BoOutcome {
        candidates: evaluated,
        trace,
        incumbent,
        incumbent_f,
        exhausted,
        evaluations,
    })
}
