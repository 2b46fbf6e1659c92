use crate::error::{Error, Result};
use crate::model::{Configuration, LoadKind, ParameterSpace, StressComponent};
use crate::rom::SurrogateModel;

/// Ordered infill pick: configurations for high-fidelity validation, with
/// the criterion value at each selection step.
#[derive(Debug, Clone)]
pub struct InfillSelection {
    pub configs: Vec<Configuration>,
    /// Criterion value of the pick at each step; its decay is the MOO
    /// convergence signal.
    pub deltas: Vec<f64>,
    /// Positions into the original candidate list.
    pub indices: Vec<usize>,
}

/// Covariance aggregation between two normalized configurations: maximum
/// over load cases (the reduced coefficients share one kernel), summed over
/// the stress tensor components.
fn aggregate_kernel(surrogate: &SurrogateModel, a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (comp_idx, _) in StressComponent::ALL.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for (case_idx, _) in LoadKind::ALL.iter().enumerate() {
            let k = surrogate.fields[case_idx * 6 + comp_idx]
                .gpr
                .kernel_value(a, b);
            best = best.max(k);
        }
        total += best;
    }
    total
}

/// Greedy covariance-increase selection over precomputed aggregation
/// matrices. `c_ll` is the symmetric candidate-candidate matrix, `c_lh` the
/// candidate-to-high-fidelity matrix. Each step selects the candidate whose
/// promotion to the high-fidelity set yields the largest total positive
/// relative covariance increase, then simulates the promotion by moving its
/// row of `c_ll` into a new `c_lh` column.
pub fn infill_select_from_matrices(
    mut c_ll: Vec<Vec<f64>>,
    mut c_lh: Vec<Vec<f64>>,
    count: usize,
) -> (Vec<usize>, Vec<f64>) {
    let mut live: Vec<usize> = (0..c_ll.len()).collect();
    let mut selected = Vec::with_capacity(count);
    let mut deltas = Vec::with_capacity(count);

    for _ in 0..count.min(c_ll.len()) {
        let n = live.len();
        if n == 0 {
            break;
        }
        // max over high-fidelity columns per remaining candidate
        let row_max: Vec<f64> = (0..n)
            .map(|j| c_lh[j].iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .map(|m| if m.is_finite() { m } else { 0.0 })
            .collect();

        let mut best_idx = 0usize;
        let mut best_delta = f64::NEG_INFINITY;
        for i in 0..n {
            let mut numerator = 0.0;
            let mut denominator = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                numerator += (c_ll[i][j] - row_max[j]).max(0.0);
                denominator += row_max[j];
            }
            let delta = if n == 1 {
                0.0
            } else if denominator == 0.0 {
                if numerator > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                numerator / denominator
            };
            if delta > best_delta {
                best_delta = delta;
                best_idx = i;
            }
        }

        selected.push(live[best_idx]);
        deltas.push(best_delta);

        // simulated promotion: row i* of C_LL becomes a new C_LH column,
        // then row and column i* disappear from both matrices
        let promoted_col: Vec<f64> = (0..n).map(|j| c_ll[j][best_idx]).collect();
        for (j, row) in c_lh.iter_mut().enumerate() {
            row.push(promoted_col[j]);
        }
        c_lh.remove(best_idx);
        c_ll.remove(best_idx);
        for row in &mut c_ll {
            row.remove(best_idx);
        }
        live.remove(best_idx);
    }
    (selected, deltas)
}

/// Builds the aggregation matrices from the surrogate's kernels and runs the
/// greedy selection. Candidates must be disjoint from the high-fidelity set.
pub fn infill_select(
    pareto_lowfi: &[Configuration],
    hifi_configs: &[Configuration],
    surrogate: &SurrogateModel,
    space: &ParameterSpace,
    count: usize,
) -> Result<InfillSelection> {
    if pareto_lowfi.is_empty() {
        return Err(Error::Data(
            "infill needs at least one low-fidelity candidate".into(),
        ));
    }
    if count > pareto_lowfi.len() {
        return Err(Error::Data(format!(
            "cannot select {count} of {} candidates",
            pareto_lowfi.len()
        )));
    }
    let hifi_keys: std::collections::BTreeSet<Vec<u64>> =
        hifi_configs.iter().map(|c| c.key()).collect();
    if pareto_lowfi.iter().any(|c| hifi_keys.contains(&c.key())) {
        return Err(Error::Data(
            "low-fidelity candidates overlap the high-fidelity set".into(),
        ));
    }

    let low: Vec<Vec<f64>> = pareto_lowfi.iter().map(|c| space.normalize(c)).collect();
    let high: Vec<Vec<f64>> = hifi_configs.iter().map(|c| space.normalize(c)).collect();
    let n = low.len();
    let mut c_ll = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = aggregate_kernel(surrogate, &low[i], &low[j]);
            c_ll[i][j] = v;
            c_ll[j][i] = v;
        }
    }
    let c_lh: Vec<Vec<f64>> = low
        .iter()
        .map(|a| {
            high.iter()
                .map(|b| aggregate_kernel(surrogate, a, b))
                .collect()
        })
        .collect();

    let (indices, deltas) = infill_select_from_matrices(c_ll, c_lh, count);
    Ok(InfillSelection {
        configs: indices.iter().map(|&i| pareto_lowfi[i].clone()).collect(),
        deltas,
        indices,
    })
}
