use std::collections::BTreeSet;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use super::LinearConstraints;
use crate::error::{Error, Result};
use crate::ilp::{solve_assignment, AssignmentIlp, Column, Coupling, IlpStatus};
use crate::model::{Configuration, ParameterSpace};

/// Nearest domain value per coordinate, ties toward the lower value.
pub fn naive_round(x_bar: &[f64], space: &ParameterSpace) -> Configuration {
    Configuration::new(
        x_bar
            .iter()
            .zip(&space.params)
            .map(|(x, p)| {
                *p.domain
                    .iter()
                    .min_by(|a, b| {
                        (*a - x)
                            .abs()
                            .total_cmp(&(*b - x).abs())
                            .then(a.total_cmp(b))
                    })
                    .unwrap()
            })
            .collect(),
    )
}

/// Rounds a continuous acquisition maximizer to an unvisited feasible
/// configuration.
///
/// The nearest-value rounding is kept when it is new and feasible; otherwise
/// a small assignment program picks the feasible configuration of minimal
/// squared distance that differs from the naive rounding in at least one
/// coordinate, under the incumbent-mass and VCG rows. If even that is a
/// duplicate, random single-coordinate perturbations are tried up to a cap.
pub fn ilp_round(
    x_bar: &[f64],
    space: &ParameterSpace,
    constraints: &LinearConstraints,
    f_incumbent: f64,
    visited: &BTreeSet<Vec<u64>>,
    rng: &mut ChaCha8Rng,
    max_perturbations: usize,
) -> Result<Configuration> {
    let naive = naive_round(x_bar, space);
    let feasible = |c: &Configuration| {
        constraints.vcg_ok(&c.values) && constraints.mass_ok(&c.values, f_incumbent)
    };
    if !visited.contains(&naive.key()) && feasible(&naive) {
        return Ok(naive);
    }

    // assignment ILP: one value per parameter, exclusion of the naive
    // rounding, mass and VCG coupling rows
    let columns: Vec<Vec<Column>> = space
        .params
        .iter()
        .zip(x_bar)
        .map(|(p, x)| {
            p.domain
                .iter()
                .enumerate()
                .map(|(idx, t)| Column {
                    value_id: idx,
                    cost: (t - x) * (t - x),
                })
                .collect()
        })
        .collect();
    let excluded: Vec<usize> = naive
        .values
        .iter()
        .zip(&space.params)
        .map(|(v, p)| {
            p.domain
                .iter()
                .position(|d| d.to_bits() == v.to_bits())
                .unwrap()
        })
        .collect();
    let mut couplings = Vec::new();
    if constraints.d.iter().any(|&v| v != 0.0) && f_incumbent.is_finite() {
        couplings.push(Coupling {
            coeffs: space
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| p.domain.iter().map(|t| constraints.d[i] * t).collect())
                .collect(),
            rhs: f_incumbent - constraints.m_fixed,
        });
    }
    if constraints.vcg_coeff.iter().any(|&v| v != 0.0) {
        couplings.push(Coupling {
            coeffs: space
                .params
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    p.domain
                        .iter()
                        .map(|t| constraints.vcg_coeff[i] * t)
                        .collect()
                })
                .collect(),
            rhs: constraints.vcg_rhs,
        });
    }
    let problem = AssignmentIlp {
        columns,
        couplings,
        cardinality: None,
        excluded: Some(excluded),
    };
    let solution = solve_assignment(&problem, 0.0, Some(std::time::Duration::from_secs(5)));
    if solution.status == IlpStatus::Infeasible {
        return Err(Error::Infeasible(
            "no admissible candidate near the rounding".into(),
        ));
    }
    let rounded = Configuration::new(
        solution
            .assignment
            .iter()
            .zip(&space.params)
            .map(|(&col, p)| p.domain[col])
            .collect(),
    );
    if !visited.contains(&rounded.key()) && feasible(&rounded) {
        return Ok(rounded);
    }

    // random single-coordinate disturbances
    let mut current = rounded;
    for _ in 0..max_perturbations {
        let i = rng.random_range(0..space.n_params());
        let len = space.params[i].domain.len();
        if len <= 1 {
            continue;
        }
        let mut values = current.values.clone();
        let new_idx = rng.random_range(0..len);
        values[i] = space.params[i].domain[new_idx];
        let candidate = Configuration::new(values);
        if !visited.contains(&candidate.key()) && feasible(&candidate) {
            return Ok(candidate);
        }
        current = candidate;
    }
    Err(Error::Exhausted(
        "perturbation cap reached without an unvisited feasible configuration".into(),
    ))
}
