use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{LinearConstraints, Objective};
use crate::error::{Error, Result};
use crate::model::{Configuration, ParameterSpace};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PdsSettings {
    pub max_sweeps: usize,
    pub time_limit_secs: Option<f64>,
}

impl Default for PdsSettings {
    fn default() -> Self {
        Self {
            max_sweeps: 20,
            time_limit_secs: Some(300.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PdsOutcome {
    pub best: Configuration,
    pub best_f: f64,
    pub evaluations: usize,
    pub sweeps: usize,
    /// Distinct configurations that improved on the start value, best first,
    /// capped at a small validation batch.
    pub improvers: Vec<(Configuration, f64)>,
}

const MAX_IMPROVERS: usize = 5;

/// Principal dimensions search: full one-parameter scans around the best
/// configuration, restarted from each improvement, until a sweep yields no
/// strict improvement or the budget runs out.
///
/// Single-coordinate changes violating the VCG row or the incumbent mass
/// bound are skipped without touching the objective, so one sweep costs at
/// most `sum(|D_i| - 1)` evaluations.
pub fn pds_run(
    objective: &dyn Objective,
    space: &ParameterSpace,
    constraints: &LinearConstraints,
    start: Configuration,
    start_f: f64,
    settings: &PdsSettings,
) -> Result<PdsOutcome> {
    if !constraints.vcg_ok(&start.values) {
        return Err(Error::Infeasible("pds start violates the VCG bound".into()));
    }
    let deadline = settings
        .time_limit_secs
        .map(|s| Instant::now() + Duration::from_secs_f64(s));
    let start_value = start_f;
    let mut best = start;
    let mut best_f = start_f;
    let mut evaluations = 0usize;
    let mut sweeps = 0usize;
    let mut improvers: Vec<(Configuration, f64)> = Vec::new();

    while sweeps < settings.max_sweeps {
        if let Some(dl) = deadline {
            if Instant::now() >= dl {
                break;
            }
        }
        sweeps += 1;
        let mut improved = false;
        // Full scan of each parameter in index order; every improvement is
        // kept, so one sweep optimizes a separable objective exactly.
        for i in 0..space.n_params() {
            let current = best.values[i];
            for &t in &space.params[i].domain {
                if t.to_bits() == current.to_bits() {
                    continue;
                }
                let mut values = best.values.clone();
                values[i] = t;
                if !constraints.vcg_ok(&values) || !constraints.mass_ok(&values, best_f) {
                    continue;
                }
                let candidate = Configuration::new(values);
                let f = objective.eval(&candidate)?;
                evaluations += 1;
                if f < start_value && !improvers.iter().any(|(c, _)| c.key() == candidate.key()) {
                    improvers.push((candidate.clone(), f));
                }
                if f < best_f {
                    best = candidate;
                    best_f = f;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    improvers.sort_by(|a, b| a.1.total_cmp(&b.1));
    improvers.truncate(MAX_IMPROVERS);
    Ok(PdsOutcome {
        best,
        best_f,
        evaluations,
        sweeps,
        improvers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParameterDef;

    fn grid_space(values: &[f64], d: usize) -> ParameterSpace {
        ParameterSpace {
            params: (0..d)
                .map(|i| ParameterDef {
                    index: i,
                    label: format!("p{i}"),
                    patch_ids: vec![i],
                    domain: values.to_vec(),
                    parent: None,
                    linear_density: 0.0,
                    vcg: 0.0,
                    default_value: values[0],
                })
                .collect(),
            version: 0,
        }
    }

    fn free(d: usize) -> LinearConstraints {
        LinearConstraints {
            d: vec![0.0; d],
            vcg_coeff: vec![0.0; d],
            vcg_rhs: 0.0,
            m_fixed: 0.0,
        }
    }

    struct FnObjective<F: Fn(&Configuration) -> f64>(F);
    impl<F: Fn(&Configuration) -> f64> Objective for FnObjective<F> {
        fn eval(&self, config: &Configuration) -> Result<f64> {
            Ok((self.0)(config))
        }
    }

    #[test]
    fn coordinate_optimal_start_is_a_fixed_point() {
        let space = grid_space(&[1.0, 2.0, 3.0], 2);
        let objective =
            FnObjective(|c: &Configuration| c.values.iter().map(|v| (v - 2.0) * (v - 2.0)).sum());
        let start = Configuration::new(vec![2.0, 2.0]);
        let out = pds_run(
            &objective,
            &space,
            &free(2),
            start.clone(),
            0.0,
            &PdsSettings {
                max_sweeps: 5,
                time_limit_secs: None,
            },
        )
        .unwrap();
        assert_eq!(out.best.values, start.values);
        assert_eq!(out.sweeps, 1);
    }

    #[test]
    fn separable_objective_reaches_the_exhaustive_optimum_in_one_sweep() {
        use rand::RngExt;
        let mut rng = crate::util::rng::stream(71, "pds-unit", &[]);
        for _ in 0..30 {
            let space = grid_space(&[1.0, 2.0, 3.0, 4.0], 3);
            // random separable convex objective sum_i w_i (x_i - c_i)^2
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..2.0)).collect();
            let c: Vec<f64> = (0..3).map(|_| rng.random_range(1.0..4.0)).collect();
            let w2 = w.clone();
            let c2 = c.clone();
            let objective = FnObjective(move |x: &Configuration| {
                x.values
                    .iter()
                    .zip(&w2)
                    .zip(&c2)
                    .map(|((v, wi), ci)| wi * (v - ci) * (v - ci))
                    .sum()
            });
            let start = Configuration::new(vec![1.0, 1.0, 1.0]);
            let f0 = objective.eval(&start).unwrap();
            let out = pds_run(
                &objective,
                &space,
                &free(3),
                start,
                f0,
                &PdsSettings {
                    max_sweeps: 1,
                    time_limit_secs: None,
                },
            )
            .unwrap();

            // exhaustive optimum over the 64 configurations
            let mut best = f64::INFINITY;
            for a in [1.0, 2.0, 3.0, 4.0] {
                for b in [1.0, 2.0, 3.0, 4.0] {
                    for d in [1.0, 2.0, 3.0, 4.0] {
                        let f = objective.eval(&Configuration::new(vec![a, b, d])).unwrap();
                        best = best.min(f);
                    }
                }
            }
            assert!(
                (out.best_f - best).abs() < 1e-12,
                "pds {} vs opt {best}",
                out.best_f
            );
            assert!(out.evaluations <= 3 * 3); // sum (|D_i| - 1)
        }
    }

    #[test]
    fn returned_objective_never_exceeds_the_start() {
        use rand::RngExt;
        let mut rng = crate::util::rng::stream(72, "pds-unit", &[]);
        for trial in 0..10 {
            let space = grid_space(&[1.0, 2.0, 3.0], 3);
            let seed = trial;
            let objective = FnObjective(move |c: &Configuration| {
                // deterministic rugged landscape
                let mut h = seed as f64;
                for v in &c.values {
                    h = (h * 1.7 + v * 13.37).sin() * 10.0;
                }
                h
            });
            let values: Vec<f64> = (0..3)
                .map(|_| [1.0, 2.0, 3.0][rng.random_range(0..3)])
                .collect();
            let start = Configuration::new(values);
            let f0 = objective.eval(&start).unwrap();
            let out = pds_run(
                &objective,
                &space,
                &free(3),
                start,
                f0,
                &PdsSettings {
                    max_sweeps: 4,
                    time_limit_secs: None,
                },
            )
            .unwrap();
            assert!(out.best_f <= f0);
        }
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let space = grid_space(&[1.0, 2.0], 1);
        let objective = FnObjective(|_: &Configuration| 0.0);
        let constraints = LinearConstraints {
            d: vec![0.0],
            vcg_coeff: vec![1.0],
            vcg_rhs: 0.5,
            m_fixed: 0.0,
        };
        let err = pds_run(
            &objective,
            &space,
            &constraints,
            Configuration::new(vec![1.0]),
            0.0,
            &PdsSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }
}
