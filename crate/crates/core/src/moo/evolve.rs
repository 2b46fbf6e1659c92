use std::collections::BTreeSet;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::hypervolume::hypervolume;
use super::niche::{select_survivors, SurvivorSelection};
use super::sort::pareto_indices;
use crate::criteria::{PenaltyConfig, QoiVector};
use crate::error::Result;
use crate::model::{Configuration, HullModel, ParameterSpace};
use crate::rom::SurrogateModel;
use crate::util::rng::stream;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MooSettings {
    pub pop_size: usize,
    pub generations: usize,
    pub seed: u64,
    /// Record the layer-1 hypervolume per generation (costs extra time).
    pub track_hypervolume: bool,
}

impl Default for MooSettings {
    fn default() -> Self {
        Self {
            pop_size: 2000,
            generations: 10,
            seed: 0,
            track_hypervolume: false,
        }
    }
}

/// An evaluated population: configurations and their five surrogate QoIs.
#[derive(Debug, Clone)]
pub struct Population {
    pub individuals: Vec<Configuration>,
    pub qois: Vec<QoiVector>,
}

impl Population {
    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.qois
            .iter()
            .map(|q| q.as_objectives().to_vec())
            .collect()
    }

    /// Indices of the non-dominated individuals.
    pub fn pareto_front(&self) -> Vec<usize> {
        pareto_indices(&self.objectives())
    }
}

#[derive(Debug, Clone)]
pub struct EvolveReport {
    pub population: Population,
    /// Layer-1 hypervolume per generation (index 0 = initial population),
    /// with the reference point fixed at the column maxima of generation 0.
    /// Empty unless tracking was enabled.
    pub hv_history: Vec<f64>,
}

type Genome = Vec<usize>;

fn genome_to_config(space: &ParameterSpace, g: &Genome) -> Configuration {
    Configuration::new(
        g.iter()
            .zip(&space.params)
            .map(|(&idx, p)| p.domain[idx])
            .collect(),
    )
}

fn config_to_genome(space: &ParameterSpace, c: &Configuration) -> Option<Genome> {
    c.values
        .iter()
        .zip(&space.params)
        .map(|(v, p)| p.domain.iter().position(|d| d.to_bits() == v.to_bits()))
        .collect()
}

/// Exhaustive enumeration of the product domain, in lexicographic order.
fn enumerate_domain(space: &ParameterSpace) -> Vec<Genome> {
    let sizes: Vec<usize> = space.params.iter().map(|p| p.domain.len()).collect();
    let mut out = Vec::new();
    let mut g = vec![0usize; sizes.len()];
    loop {
        out.push(g.clone());
        let mut i = 0;
        loop {
            if i == sizes.len() {
                return out;
            }
            g[i] += 1;
            if g[i] < sizes[i] {
                break;
            }
            g[i] = 0;
            i += 1;
        }
    }
}

/// Genetic multi-objective optimization over the surrogate QoIs.
///
/// The initial population samples the discrete domain uniformly (or
/// enumerates it when it is smaller than the population) and always injects
/// the surrogate's training configurations. Parents are chosen by binary
/// tournament on (rank, niche count); crossover is uniform per parameter;
/// mutation steps to an adjacent domain value with probability 1/d. The
/// refinement hierarchy is deliberately not enforced: children explore the
/// full refined domain. Reproducible from the seed.
pub fn evolve(
    surrogate: &SurrogateModel,
    model: &HullModel,
    space: &ParameterSpace,
    pen: &PenaltyConfig,
    settings: &MooSettings,
) -> Result<EvolveReport> {
    assert!(settings.pop_size >= 2, "population size must be at least 2");
    let d = space.n_params();
    let mut rng = stream(settings.seed, "moo-evolve", &[d as u64]);

    // --- initial population ---
    let mut seen: BTreeSet<Genome> = BTreeSet::new();
    let mut genomes: Vec<Genome> = Vec::new();
    if space.total_configurations() <= settings.pop_size as f64 {
        for g in enumerate_domain(space) {
            if seen.insert(g.clone()) {
                genomes.push(g);
            }
        }
    } else {
        for config in &surrogate.training_configs {
            if let Some(g) = config_to_genome(space, config) {
                if genomes.len() < settings.pop_size && seen.insert(g.clone()) {
                    genomes.push(g);
                }
            }
        }
        let mut attempts = 0usize;
        while genomes.len() < settings.pop_size && attempts < settings.pop_size * 200 {
            attempts += 1;
            let g: Genome = space
                .params
                .iter()
                .map(|p| rng.random_range(0..p.domain.len()))
                .collect();
            if seen.insert(g.clone()) {
                genomes.push(g);
            }
        }
    }

    let evaluate = |genomes: &[Genome]| -> Result<Vec<QoiVector>> {
        let configs: Vec<Configuration> =
            genomes.iter().map(|g| genome_to_config(space, g)).collect();
        surrogate.predict_qois(model, space, pen, &configs)
    };

    let mut qois = evaluate(&genomes)?;
    let mut objectives: Vec<Vec<f64>> = qois.iter().map(|q| q.as_objectives().to_vec()).collect();

    // hypervolume reference: column maxima of generation 0
    let reference: Vec<f64> = (0..5)
        .map(|c| {
            objectives
                .iter()
                .map(|o| o[c])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut hv_history = Vec::new();
    let record_hv = |objectives: &[Vec<f64>], hv_history: &mut Vec<f64>| {
        if settings.track_hypervolume {
            let front = pareto_indices(objectives);
            let pts: Vec<Vec<f64>> = front.iter().map(|&i| objectives[i].clone()).collect();
            hv_history.push(hypervolume(&pts, &reference));
        }
    };
    record_hv(&objectives, &mut hv_history);

    let mut sel = select_survivors(&objectives, settings.pop_size, settings.seed);
    let reorder = |v: Vec<Genome>, sel: &SurvivorSelection| -> Vec<Genome> {
        sel.selected.iter().map(|&i| v[i].clone()).collect()
    };
    genomes = reorder(genomes, &sel);
    qois = sel.selected.iter().map(|&i| qois[i]).collect();

    for gen in 0..settings.generations {
        // --- binary tournament on (rank, niche count) ---
        let pop_n = genomes.len();
        let tournament = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
            let a = rng.random_range(0..pop_n);
            let b = rng.random_range(0..pop_n);
            match sel.rank[a].cmp(&sel.rank[b]) {
                std::cmp::Ordering::Less => a,
                std::cmp::Ordering::Greater => b,
                std::cmp::Ordering::Equal => match sel.niche_count[a].cmp(&sel.niche_count[b]) {
                    std::cmp::Ordering::Less => a,
                    std::cmp::Ordering::Greater => b,
                    std::cmp::Ordering::Equal => a.min(b),
                },
            }
        };

        let mut pool: BTreeSet<Genome> = genomes.iter().cloned().collect();
        let mut children: Vec<Genome> = Vec::with_capacity(settings.pop_size);
        let mut attempts = 0usize;
        while children.len() < settings.pop_size && attempts < settings.pop_size * 20 {
            attempts += 1;
            let pa = &genomes[tournament(&mut rng)];
            let pb = &genomes[tournament(&mut rng)];
            // uniform crossover per parameter
            let mut child: Genome = (0..d)
                .map(|i| if rng.random_bool(0.5) { pa[i] } else { pb[i] })
                .collect();
            // adjacent-value mutation with probability 1/d per parameter
            let p_mut = 1.0 / d.max(1) as f64;
            for (i, gene) in child.iter_mut().enumerate() {
                let len = space.params[i].domain.len();
                if len > 1 && rng.random_bool(p_mut) {
                    *gene = step_adjacent(*gene, len, &mut rng);
                }
            }
            // repair-by-remutation when the child duplicates the pool
            let mut tries = 0;
            while pool.contains(&child) && tries < 10 {
                let i = rng.random_range(0..d);
                let len = space.params[i].domain.len();
                if len > 1 {
                    child[i] = step_adjacent(child[i], len, &mut rng);
                }
                tries += 1;
            }
            if pool.insert(child.clone()) {
                children.push(child);
            }
        }

        let child_qois = evaluate(&children)?;
        let mut combined = genomes.clone();
        combined.extend(children);
        let mut combined_qois = qois.clone();
        combined_qois.extend(child_qois);
        let combined_obj: Vec<Vec<f64>> = combined_qois
            .iter()
            .map(|q| q.as_objectives().to_vec())
            .collect();

        sel = select_survivors(
            &combined_obj,
            settings.pop_size,
            settings.seed ^ (gen as u64 + 1),
        );
        genomes = reorder(combined, &sel);
        qois = sel.selected.iter().map(|&i| combined_qois[i]).collect();
        objectives = sel
            .selected
            .iter()
            .map(|&i| combined_obj[i].clone())
            .collect();
        record_hv(&objectives, &mut hv_history);
    }

    let individuals = genomes.iter().map(|g| genome_to_config(space, g)).collect();
    Ok(EvolveReport {
        population: Population { individuals, qois },
        hv_history,
    })
}

fn step_adjacent(idx: usize, len: usize, rng: &mut rand_chacha::ChaCha8Rng) -> usize {
    if idx == 0 {
        1
    } else if idx == len - 1 {
        idx - 1
    } else if rng.random_bool(0.5) {
        idx + 1
    } else {
        idx - 1
    }
}
