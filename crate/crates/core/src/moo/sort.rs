/// `a` dominates `b`: no worse on every objective, strictly better on at
/// least one (minimization).
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Fast non-dominated sort. Layer 1 holds the non-dominated points; each
/// later layer is non-dominated once the earlier ones are removed. The
/// returned layers partition the input indices.
pub fn non_dominated_sort(objectives: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let p = objectives.len();
    if p == 0 {
        return Vec::new();
    }
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); p];
    let mut domination_count = vec![0usize; p];
    for i in 0..p {
        for j in (i + 1)..p {
            if dominates(&objectives[i], &objectives[j]) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&objectives[j], &objectives[i]) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut layers = Vec::new();
    let mut current: Vec<usize> = (0..p).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        layers.push(std::mem::take(&mut current));
        current = next;
    }
    layers
}

/// Indices of the non-dominated points.
pub fn pareto_indices(objectives: &[Vec<f64>]) -> Vec<usize> {
    non_dominated_sort(objectives)
        .into_iter()
        .next()
        .unwrap_or_default()
}
