//! Data-driven parameterization refinement: per-patch structural responses
//! around the incumbent, per-section clustering programs, knapsack selection
//! of refinements under the parameter budget, hierarchical splitting, and
//! resampling of the enlarged domain.

use std::collections::BTreeSet;

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{self, PenaltyConfig};
use crate::error::{Error, Result};
use crate::ilp::{
    solve_assignment, solve_knapsack, AssignmentIlp, Cardinality, Column, Coupling, IlpStatus,
    KnapsackItem,
};
use crate::model::{Configuration, HullModel, ParameterSpace, Patch};
use crate::rom::{SnapshotDatabase, SurrogateModel};
use crate::util::rng::stream;

/// Yield/buckle responses of one patch across the thickness domain of its
/// section.
#[derive(Debug, Clone)]
pub struct PatchResponse {
    pub section: usize,
    pub patch: usize,
    /// Parallel to the section's domain: yielded element count per value.
    pub yielded: Vec<usize>,
    /// Parallel to the section's domain: buckled element count per value.
    pub buckled: Vec<usize>,
    /// Patch linear density (t/mm).
    pub linear_density: f64,
    /// Patch VCG (m).
    pub vcg: f64,
}

/// Optimal clustering of one section's patches for a fixed cluster count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementProposal {
    pub section: usize,
    pub n_clusters: usize,
    /// Thickness assigned to each patch of the section (parallel to the
    /// section's patch list).
    pub assignment: Vec<f64>,
    pub ilp_objective: f64,
    /// Baseline objective (all patches at the incumbent value) minus the
    /// clustering optimum; positive means the split pays off.
    pub improvement: f64,
    pub feasible: bool,
}

/// VCG context of one per-section program: mass and VCG of everything not
/// controlled by the section.
#[derive(Debug, Clone, Copy)]
pub struct VcgContext {
    pub vcg_rest: f64,
    pub m_rest: f64,
    pub vcg_crit: f64,
}

impl VcgContext {
    /// Everything outside section `i`, evaluated at the incumbent.
    pub fn for_section(
        space: &ParameterSpace,
        pen: &PenaltyConfig,
        incumbent: &Configuration,
        section: usize,
    ) -> Self {
        let mut m_rest = pen.m_fixed;
        let mut moment = pen.vcg_fixed * pen.m_fixed;
        for (k, p) in space.params.iter().enumerate() {
            if k != section {
                m_rest += p.linear_density * incumbent.values[k];
                moment += p.vcg * p.linear_density * incumbent.values[k];
            }
        }
        Self {
            vcg_rest: moment / m_rest,
            m_rest,
            vcg_crit: pen.vcg_crit,
        }
    }
}

/// Per-patch yield/buckle responses of one section: the surrogate is queried
/// at the incumbent with the section's value swept over its domain, falling
/// back to stored high-fidelity snapshots when the exact configuration is in
/// the database.
pub fn collect_responses(
    surrogate: &SurrogateModel,
    db: &SnapshotDatabase,
    model: &HullModel,
    space: &ParameterSpace,
    pen: &PenaltyConfig,
    incumbent: &Configuration,
    section: usize,
) -> Result<Vec<PatchResponse>> {
    let param = &space.params[section];
    let patches = &param.patch_ids;
    let mut yielded = vec![vec![0usize; param.domain.len()]; patches.len()];
    let mut buckled = vec![vec![0usize; param.domain.len()]; patches.len()];

    for (ti, &t) in param.domain.iter().enumerate() {
        let mut values = incumbent.values.clone();
        values[section] = t;
        let config = Configuration::new(values);
        // exact high-fidelity result wins over the surrogate when available
        let snapshot = match db.get(&config) {
            Some(entry) => entry.snapshot.clone(),
            None => surrogate.predict_fields(space, &config)?,
        };
        let mut thickness: Vec<f64> = model
            .fixed_thickness
            .iter()
            .map(|f| f.unwrap_or(0.0))
            .collect();
        for (p, v) in space.params.iter().zip(&config.values) {
            for &pid in &p.patch_ids {
                for &eid in &model.patches[pid].element_ids {
                    thickness[eid] = *v;
                }
            }
        }
        let failures = criteria::evaluate_failures(
            &snapshot,
            &model.elements,
            &thickness,
            &model.material,
            &pen.yield_thresholds,
        )?;
        for (pi, &pid) in patches.iter().enumerate() {
            let mut y = 0;
            let mut b = 0;
            for &eid in &model.patches[pid].element_ids {
                if failures.yielded[eid] {
                    y += 1;
                }
                if failures.buckled[eid] {
                    b += 1;
                }
            }
            yielded[pi][ti] = y;
            buckled[pi][ti] = b;
        }
    }

    Ok(patches
        .iter()
        .enumerate()
        .map(|(pi, &pid)| PatchResponse {
            section,
            patch: pid,
            yielded: yielded[pi].clone(),
            buckled: buckled[pi].clone(),
            linear_density: model.patches[pid].linear_density_coeff,
            vcg: model.patches[pid].vcg,
        })
        .collect())
}

/// Per-(patch, value) cost of the clustering program: plate mass,
/// reinforcement bars, and the sum-of-squares per-patch penalty.
fn clustering_cost(r: &PatchResponse, ti: usize, t: f64, pen: &PenaltyConfig) -> f64 {
    let y = r.yielded[ti] as f64;
    let b = r.buckled[ti] as f64;
    r.linear_density * t + pen.m_bar * b + pen.c_y * y * y + pen.c_b * b * b
}

/// Builds and solves the clustering program of one section for a fixed
/// cluster count, under the VCG coupling row.
pub fn propose_refinement(
    responses: &[PatchResponse],
    domain: &[f64],
    incumbent_value: f64,
    pen: &PenaltyConfig,
    n_clusters: usize,
    vcg: &VcgContext,
) -> Result<RefinementProposal> {
    let section = responses
        .first()
        .map(|r| r.section)
        .ok_or_else(|| Error::Data("clustering needs at least one patch response".into()))?;
    if n_clusters < 2 || n_clusters > domain.len() {
        return Err(Error::Config(format!(
            "n_clusters {n_clusters} outside [2, {}]",
            domain.len()
        )));
    }
    if responses.len() < n_clusters {
        return Err(Error::Config(format!(
            "section {section} has {} patches, fewer than {n_clusters} clusters",
            responses.len()
        )));
    }

    let columns: Vec<Vec<Column>> = responses
        .iter()
        .map(|r| {
            domain
                .iter()
                .enumerate()
                .map(|(ti, &t)| Column {
                    value_id: ti,
                    cost: clustering_cost(r, ti, t, pen),
                })
                .collect()
        })
        .collect();
    let coupling = Coupling {
        coeffs: responses
            .iter()
            .map(|r| {
                domain
                    .iter()
                    .map(|&t| (r.vcg - vcg.vcg_crit) * r.linear_density * t)
                    .collect()
            })
            .collect(),
        rhs: (vcg.vcg_crit - vcg.vcg_rest) * vcg.m_rest,
    };
    let problem = AssignmentIlp {
        columns,
        couplings: vec![coupling],
        cardinality: Some(Cardinality {
            n_values: domain.len(),
            n_clusters,
        }),
        excluded: None,
    };
    let solution = solve_assignment(&problem, 0.0, Some(std::time::Duration::from_secs(30)));
    if solution.status == IlpStatus::Infeasible {
        return Ok(RefinementProposal {
            section,
            n_clusters,
            assignment: Vec::new(),
            ilp_objective: f64::INFINITY,
            improvement: f64::NEG_INFINITY,
            feasible: false,
        });
    }

    // baseline: every patch at the incumbent value
    let ti_inc = domain
        .iter()
        .position(|d| d.to_bits() == incumbent_value.to_bits())
        .ok_or_else(|| Error::Domain("incumbent value not in the section domain".into()))?;
    let baseline: f64 = responses
        .iter()
        .map(|r| clustering_cost(r, ti_inc, incumbent_value, pen))
        .sum();

    Ok(RefinementProposal {
        section,
        n_clusters,
        assignment: solution.assignment.iter().map(|&c| domain[c]).collect(),
        ilp_objective: solution.objective,
        improvement: baseline - solution.objective,
        feasible: true,
    })
}

/// Sweeps every section and cluster count, solving the per-section programs
/// in parallel.
pub fn propose_all(
    surrogate: &SurrogateModel,
    db: &SnapshotDatabase,
    model: &HullModel,
    space: &ParameterSpace,
    pen: &PenaltyConfig,
    incumbent: &Configuration,
    max_clusters: usize,
) -> Result<Vec<Vec<RefinementProposal>>> {
    let sections: Vec<usize> = (0..space.n_params()).collect();
    sections
        .par_iter()
        .map(|&section| {
            let responses =
                collect_responses(surrogate, db, model, space, pen, incumbent, section)?;
            let domain = &space.params[section].domain;
            let vcg = VcgContext::for_section(space, pen, incumbent, section);
            let mut proposals = Vec::new();
            for n_clusters in 2..=max_clusters.min(domain.len()).min(responses.len()) {
                proposals.push(propose_refinement(
                    &responses,
                    domain,
                    incumbent.values[section],
                    pen,
                    n_clusters,
                    &vcg,
                )?);
            }
            Ok(proposals)
        })
        .collect()
}

/// Knapsack selection: at most one refinement per section, value =
/// improvement, cost = added parameters, within the parameter budget.
pub fn select_refinements(
    proposals: &[Vec<RefinementProposal>],
    current_params: usize,
    max_params_budget: usize,
) -> Result<Vec<Option<RefinementProposal>>> {
    if max_params_budget < current_params {
        return Err(Error::Config(format!(
            "parameter budget {max_params_budget} below the current count {current_params}"
        )));
    }
    let groups: Vec<Vec<KnapsackItem>> = proposals
        .iter()
        .map(|group| {
            group
                .iter()
                .map(|p| KnapsackItem {
                    clusters: p.n_clusters,
                    value: if p.feasible {
                        p.improvement
                    } else {
                        f64::NEG_INFINITY
                    },
                })
                .collect()
        })
        .collect();
    let chosen = solve_knapsack(&groups, max_params_budget - current_params);
    Ok(chosen
        .iter()
        .enumerate()
        .map(|(g, &pick)| pick.map(|idx| proposals[g][idx].clone()))
        .collect())
}

/// Applies the chosen refinements: the cluster whose assigned value is
/// closest to the incumbent keeps the old parameter (ties toward the larger
/// cluster, then the lower value); every other cluster becomes a new child
/// parameter with the same domain. Densities and VCGs are recomputed.
/// Returns the refined space and the joined ILP-optimal configuration
/// expressed in it.
pub fn apply_refinements(
    space: &ParameterSpace,
    patches: &[Patch],
    incumbent: &Configuration,
    chosen: &[Option<RefinementProposal>],
) -> Result<(ParameterSpace, Configuration)> {
    if chosen.len() != space.n_params() {
        return Err(Error::Data(
            "one proposal slot per section is required".into(),
        ));
    }
    let mut new_space = space.clone();
    let mut joined = space.lift(incumbent); // identity at this point
    for (section, slot) in chosen.iter().enumerate() {
        let Some(proposal) = slot else { continue };
        if !proposal.feasible || proposal.assignment.len() != space.params[section].patch_ids.len()
        {
            return Err(Error::Data(format!(
                "inconsistent proposal for section {section}"
            )));
        }
        let section_patches = space.params[section].patch_ids.clone();

        // group patches by assigned value
        let mut values: Vec<f64> = Vec::new();
        for v in &proposal.assignment {
            if !values.iter().any(|x| x.to_bits() == v.to_bits()) {
                values.push(*v);
            }
        }
        values.sort_by(|a, b| a.total_cmp(b));
        if values.len() != proposal.n_clusters {
            return Err(Error::Data(format!(
                "proposal for section {section} uses {} distinct values, expected {}",
                values.len(),
                proposal.n_clusters
            )));
        }
        let cluster_of = |v: f64| {
            values
                .iter()
                .position(|x| x.to_bits() == v.to_bits())
                .unwrap()
        };
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); values.len()];
        for (pi, v) in proposal.assignment.iter().enumerate() {
            members[cluster_of(*v)].push(section_patches[pi]);
        }

        // keeper cluster: assigned value closest to the incumbent value,
        // ties toward the larger cluster, then the lower value
        let x_inc = incumbent.values[section];
        let keeper = (0..values.len())
            .min_by(|&a, &b| {
                (values[a] - x_inc)
                    .abs()
                    .total_cmp(&(values[b] - x_inc).abs())
                    .then(members[b].len().cmp(&members[a].len()))
                    .then(values[a].total_cmp(&values[b]))
            })
            .unwrap();

        let recompute = |patch_ids: &[usize]| -> (f64, f64) {
            let d: f64 = patch_ids
                .iter()
                .map(|&p| patches[p].linear_density_coeff)
                .sum();
            let vcg = patch_ids
                .iter()
                .map(|&p| patches[p].linear_density_coeff * patches[p].vcg)
                .sum::<f64>()
                / d;
            (d, vcg)
        };

        // keeper stays on the old parameter index
        let (d, vcg) = recompute(&members[keeper]);
        new_space.params[section].patch_ids = members[keeper].clone();
        new_space.params[section].linear_density = d;
        new_space.params[section].vcg = vcg;
        joined.values[section] = values[keeper];

        for (ci, value) in values.iter().enumerate() {
            if ci == keeper {
                continue;
            }
            let index = new_space.params.len();
            let (d, vcg) = recompute(&members[ci]);
            new_space.params.push(crate::model::ParameterDef {
                index,
                label: format!("{}.{}", space.params[section].label, ci),
                patch_ids: members[ci].clone(),
                domain: space.params[section].domain.clone(),
                parent: Some(section),
                linear_density: d,
                vcg,
                default_value: space.params[section].default_value,
            });
            joined.values.push(*value);
        }
    }
    new_space.version += 1;
    new_space.validate(patches)?;
    debug_assert!(new_space.contains(&joined));
    Ok((new_space, joined))
}

/// Whether the joined clustering assignment satisfies the global VCG bound;
/// per-section programs only see their local context, so the union may
/// violate it. Reported as a diagnostic, never asserted.
pub fn joined_vcg_feasible(
    space: &ParameterSpace,
    patches: &[Patch],
    pen: &PenaltyConfig,
    joined: &Configuration,
) -> bool {
    criteria::structural_vcg(joined, space, patches, pen) <= pen.vcg_crit + 1e-9
}

/// Max-min-distance resampling of a refined domain: `trials` candidate sets
/// of `count` uniform samples are scored by the minimum normalized pairwise
/// distance over candidates and existing (lifted) configurations; the best
/// set wins. Returned configurations are unvisited.
pub fn resample_domain(
    space: &ParameterSpace,
    existing: &[Configuration],
    count: usize,
    trials: usize,
    seed: u64,
) -> Vec<Configuration> {
    let mut rng = stream(seed, "reparam-resample", &[space.version as u64]);
    let existing_keys: BTreeSet<Vec<u64>> = existing.iter().map(|c| c.key()).collect();
    let existing_norm: Vec<Vec<f64>> = existing.iter().map(|c| space.normalize(c)).collect();

    let total = space.total_configurations();
    let reachable = (total - existing.len() as f64).max(0.0);
    let target = (count as f64).min(reachable) as usize;
    if target == 0 {
        return Vec::new();
    }
    if (target as f64) < count as f64 {
        eprintln!(
            "warning: refined domain supports only {target} new samples of the requested {count}"
        );
    }

    let min_set_distance = |set: &[Configuration]| -> f64 {
        let norm: Vec<Vec<f64>> = set.iter().map(|c| space.normalize(c)).collect();
        let mut min_dist = f64::INFINITY;
        for i in 0..norm.len() {
            for j in 0..i {
                min_dist = min_dist.min(euclid(&norm[i], &norm[j]));
            }
            for e in &existing_norm {
                min_dist = min_dist.min(euclid(&norm[i], e));
            }
        }
        min_dist
    };

    let mut best_set: Option<(f64, Vec<Configuration>)> = None;
    for _ in 0..trials.max(1) {
        let mut set: Vec<Configuration> = Vec::with_capacity(target);
        let mut keys = existing_keys.clone();
        let mut attempts = 0;
        while set.len() < target && attempts < target * 500 + 1000 {
            attempts += 1;
            let values: Vec<f64> = space
                .params
                .iter()
                .map(|p| p.domain[rng.random_range(0..p.domain.len())])
                .collect();
            let c = Configuration::new(values);
            if keys.insert(c.key()) {
                set.push(c);
            }
        }
        if set.is_empty() {
            continue;
        }
        let score = min_set_distance(&set);
        let better = match &best_set {
            None => true,
            Some((best_score, best)) => {
                set.len() > best.len() || (set.len() == best.len() && score > *best_score)
            }
        };
        if better {
            best_set = Some((score, set));
        }
    }
    best_set.map(|(_, set)| set).unwrap_or_default()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
