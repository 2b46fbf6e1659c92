use rand::seq::SliceRandom;

use super::sort::non_dominated_sort;
use crate::util::rng::stream;

/// Survivor selection result. `selected` indexes the input population;
/// `rank` and `niche_count` are parallel to `selected` and drive the genetic
/// tournament.
#[derive(Debug, Clone)]
pub struct SurvivorSelection {
    pub selected: Vec<usize>,
    pub rank: Vec<usize>,
    pub niche_count: Vec<usize>,
}

/// Das-Dennis simplex lattice reference directions for `k` objectives with
/// `divisions` per axis.
pub fn das_dennis(k: usize, divisions: usize) -> Vec<Vec<f64>> {
    fn recurse(
        k: usize,
        left: usize,
        divisions: usize,
        prefix: &mut Vec<f64>,
        out: &mut Vec<Vec<f64>>,
    ) {
        if k == 1 {
            let mut dir = prefix.clone();
            dir.push(left as f64 / divisions as f64);
            out.push(dir);
            return;
        }
        for i in 0..=left {
            prefix.push(i as f64 / divisions as f64);
            recurse(k - 1, left - i, divisions, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    recurse(k, divisions, divisions, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: usize, r: usize) -> usize {
    let mut acc = 1usize;
    for i in 0..r {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Smallest division count whose lattice has at least `target` directions.
fn divisions_for(k: usize, target: usize) -> usize {
    let mut h = 1;
    while binomial(h + k - 1, k - 1) < target && h < 500 {
        h += 1;
    }
    h
}

/// Perpendicular distance of point `f` from the ray through the origin along
/// `w`.
fn perpendicular_distance(f: &[f64], w: &[f64]) -> f64 {
    let norm_w: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_w == 0.0 {
        return f.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let proj: f64 = f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / norm_w;
    let d2: f64 = f
        .iter()
        .zip(w)
        .map(|(a, b)| {
            let r = a - proj * b / norm_w;
            r * r
        })
        .sum();
    d2.max(0.0).sqrt()
}

struct NicheAssignment {
    /// Nearest direction per union position.
    niche_of: Vec<usize>,
    /// Distance of each union position to its nearest direction.
    distance: Vec<f64>,
    n_dirs: usize,
}

/// Min-max normalization over the union, Das-Dennis directions sized to the
/// limit, nearest-direction assignment by perpendicular distance.
fn assign_niches(objectives: &[Vec<f64>], union: &[usize], limit: usize) -> NicheAssignment {
    let k = objectives.first().map_or(1, |o| o.len());
    let mut mins = vec![f64::INFINITY; k];
    let mut maxs = vec![f64::NEG_INFINITY; k];
    for &i in union {
        for c in 0..k {
            mins[c] = mins[c].min(objectives[i][c]);
            maxs[c] = maxs[c].max(objectives[i][c]);
        }
    }
    let dirs = das_dennis(k, divisions_for(k, limit.clamp(1, 2000)));
    let mut niche_of = Vec::with_capacity(union.len());
    let mut distance = Vec::with_capacity(union.len());
    for &i in union {
        let f: Vec<f64> = (0..k)
            .map(|c| {
                if maxs[c] > mins[c] {
                    (objectives[i][c] - mins[c]) / (maxs[c] - mins[c])
                } else {
                    0.5
                }
            })
            .collect();
        let (best, dist) = dirs
            .iter()
            .enumerate()
            .map(|(idx, w)| (idx, perpendicular_distance(&f, w)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        niche_of.push(best);
        distance.push(dist);
    }
    NicheAssignment {
        niche_of,
        distance,
        n_dirs: dirs.len(),
    }
}

/// NSGA-III style survivor selection: whole non-dominated layers are taken
/// until the limit is reached, and the boundary layer is downsampled by
/// reference-direction niching. Objectives are normalized per column to
/// [0, 1] over the union of the considered layers. Deterministic given the
/// seed, which only shuffles the direction tie-break order.
pub fn select_survivors(objectives: &[Vec<f64>], limit: usize, seed: u64) -> SurvivorSelection {
    let p = objectives.len();
    let layers = non_dominated_sort(objectives);
    let mut rank_of = vec![0usize; p];
    for (r, layer) in layers.iter().enumerate() {
        for &i in layer {
            rank_of[i] = r;
        }
    }

    let mut accepted: Vec<usize> = Vec::with_capacity(limit.min(p));
    let mut boundary: Vec<usize> = Vec::new();
    for layer in &layers {
        if accepted.len() + layer.len() <= limit {
            accepted.extend_from_slice(layer);
        } else {
            boundary = layer.clone();
            break;
        }
    }

    let union: Vec<usize> = accepted.iter().chain(&boundary).copied().collect();
    let niches = assign_niches(objectives, &union, limit);
    let mut counts = vec![0usize; niches.n_dirs];
    for pos in 0..accepted.len() {
        counts[niches.niche_of[pos]] += 1;
    }

    let mut selected = accepted.clone();
    if !boundary.is_empty() {
        let mut rng = stream(seed, "niche-fill", &[p as u64, limit as u64]);
        let mut dir_order: Vec<usize> = (0..niches.n_dirs).collect();
        dir_order.shuffle(&mut rng);
        // boundary candidates per direction, as positions into `union`
        let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); niches.n_dirs];
        for pos in accepted.len()..union.len() {
            candidates[niches.niche_of[pos]].push(pos);
        }
        while selected.len() < limit {
            let dir = dir_order
                .iter()
                .copied()
                .filter(|&d| !candidates[d].is_empty())
                .min_by_key(|&d| counts[d]);
            let Some(dir) = dir else { break };
            let (slot, _) = candidates[dir]
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| {
                    niches.distance[a]
                        .total_cmp(&niches.distance[b])
                        .then(union[a].cmp(&union[b]))
                })
                .unwrap();
            let pos = candidates[dir].remove(slot);
            selected.push(union[pos]);
            counts[dir] += 1;
        }
    }

    // per-selected metadata; positions in union order match selection order
    let rank = selected.iter().map(|&i| rank_of[i]).collect();
    let union_pos_of = |slot: usize, idx: usize| -> usize {
        if slot < accepted.len() {
            slot
        } else {
            union.iter().position(|&u| u == idx).unwrap()
        }
    };
    let niche_count = selected
        .iter()
        .enumerate()
        .map(|(slot, &idx)| counts[niches.niche_of[union_pos_of(slot, idx)]])
        .collect();
    SurvivorSelection {
        selected,
        rank,
        niche_count,
    }
}
