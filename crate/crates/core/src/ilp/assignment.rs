use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// One admissible (value, cost) choice for a row.
#[derive(Debug, Clone, Copy)]
pub struct Column {
    /// Index into the shared value set; only meaningful when a cardinality
    /// layer is present, but always carried for the exclusion constraint and
    /// debug dumps.
    pub value_id: usize,
    pub cost: f64,
}

/// Linear coupling constraint `sum over rows of coeff[row][col] <= rhs`.
#[derive(Debug, Clone)]
pub struct Coupling {
    /// `coeffs[row][k]` is the contribution of picking the k-th column of
    /// `row`; shapes must mirror `AssignmentIlp::columns`.
    pub coeffs: Vec<Vec<f64>>,
    pub rhs: f64,
}

/// Cardinality layer: exactly `n_clusters` distinct value ids must be used,
/// over a shared value set of size `n_values`.
#[derive(Debug, Clone, Copy)]
pub struct Cardinality {
    pub n_values: usize,
    pub n_clusters: usize,
}

/// One-value-per-row assignment problem shared by the rounding and the
/// clustering programs.
#[derive(Debug, Clone, Default)]
pub struct AssignmentIlp {
    /// Admissible columns per row; every row needs at least one.
    pub columns: Vec<Vec<Column>>,
    pub couplings: Vec<Coupling>,
    pub cardinality: Option<Cardinality>,
    /// Forbidden full assignment (column index per row): at least one row
    /// must pick a different column.
    pub excluded: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlpStatus {
    Optimal,
    Infeasible,
    GapLimit,
}

#[derive(Debug, Clone)]
pub struct IlpSolution {
    /// Chosen column index per row (in the caller's row order).
    pub assignment: Vec<usize>,
    pub objective: f64,
    pub status: IlpStatus,
    /// Upper bound on `objective - true optimum`; zero when `Optimal`.
    pub gap: f64,
}

const EPS: f64 = 1e-9;

impl AssignmentIlp {
    /// Canonical objective of a complete assignment: costs summed in row
    /// order, so the solver and any enumeration oracle agree bitwise.
    pub fn objective_of(&self, assignment: &[usize]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .fold(0.0, |acc, (r, &c)| acc + self.columns[r][c].cost)
    }

    /// Checks every constraint of the problem on a complete assignment.
    pub fn is_feasible(&self, assignment: &[usize]) -> bool {
        if assignment.len() != self.columns.len() {
            return false;
        }
        if let Some(excl) = &self.excluded {
            if assignment == excl.as_slice() {
                return false;
            }
        }
        for coupling in &self.couplings {
            let lhs: f64 = assignment
                .iter()
                .enumerate()
                .map(|(r, &c)| coupling.coeffs[r][c])
                .sum();
            if lhs > coupling.rhs + EPS {
                return false;
            }
        }
        if let Some(card) = &self.cardinality {
            let mut used = vec![false; card.n_values];
            for (r, &c) in assignment.iter().enumerate() {
                used[self.columns[r][c].value_id] = true;
            }
            if used.iter().filter(|&&u| u).count() != card.n_clusters {
                return false;
            }
        }
        true
    }

    /// Plain-text dump in an LP-like format for external cross-checking.
    pub fn dump_lp(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "minimize");
        for (r, cols) in self.columns.iter().enumerate() {
            for (k, col) in cols.iter().enumerate() {
                let _ = writeln!(s, "  + {} x_{}_{}", col.cost, r, k);
            }
        }
        let _ = writeln!(s, "subject to");
        for (r, cols) in self.columns.iter().enumerate() {
            let terms: Vec<String> = (0..cols.len()).map(|k| format!("x_{r}_{k}")).collect();
            let _ = writeln!(s, "  {} = 1", terms.join(" + "));
        }
        for (ci, coupling) in self.couplings.iter().enumerate() {
            let _ = write!(s, "  c{ci}:");
            for (r, coeffs) in coupling.coeffs.iter().enumerate() {
                for (k, coeff) in coeffs.iter().enumerate() {
                    let _ = write!(s, " + {coeff} x_{r}_{k}");
                }
            }
            let _ = writeln!(s, " <= {}", coupling.rhs);
        }
        if let Some(excl) = &self.excluded {
            let terms: Vec<String> = excl
                .iter()
                .enumerate()
                .map(|(r, &k)| format!("x_{r}_{k}"))
                .collect();
            let _ = writeln!(s, "  {} <= {}", terms.join(" + "), excl.len() - 1);
        }
        if let Some(card) = &self.cardinality {
            let _ = writeln!(
                s,
                "  sum(u_t) = {} over {} values",
                card.n_clusters, card.n_values
            );
        }
        s
    }
}

struct SearchCtx<'a> {
    problem: &'a AssignmentIlp,
    /// Row visit order: decreasing cost spread, ties by original index.
    order: Vec<usize>,
    deadline: Option<Instant>,
    timed_out: bool,
    nodes: u64,
    best_cost: f64,
    best_assignment: Option<Vec<usize>>,
    /// Smallest lower bound among subtrees abandoned by the deadline.
    abandoned_bound: f64,
}

/// Exact branch-and-bound for [`AssignmentIlp`].
///
/// With `gap_limit = 0` and no deadline hit the returned solution is a global
/// optimum. A cardinality layer is handled by outer enumeration over the
/// `C(n_values, n_clusters)` active-value subsets; the inner search assigns
/// rows in order of decreasing cost spread with a per-row-minimum lower bound
/// that accounts for remaining coupling slack.
pub fn solve_assignment(
    problem: &AssignmentIlp,
    gap_limit: f64,
    time_limit: Option<Duration>,
) -> IlpSolution {
    debug_assert!(problem.columns.iter().all(|c| !c.is_empty()));
    let deadline = time_limit.map(|t| Instant::now() + t);

    let mut order: Vec<usize> = (0..problem.columns.len()).collect();
    let spread = |r: usize| -> f64 {
        let costs = &problem.columns[r];
        let min = costs.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
        let max = costs
            .iter()
            .map(|c| c.cost)
            .fold(f64::NEG_INFINITY, f64::max);
        max - min
    };
    order.sort_by(|&a, &b| spread(b).total_cmp(&spread(a)).then(a.cmp(&b)));

    let mut ctx = SearchCtx {
        problem,
        order,
        deadline,
        timed_out: false,
        nodes: 0,
        best_cost: f64::INFINITY,
        best_assignment: None,
        abandoned_bound: f64::INFINITY,
    };

    match problem.cardinality {
        None => search_subset(&mut ctx, None, gap_limit),
        Some(card) => {
            let mut subset = Vec::with_capacity(card.n_clusters);
            enumerate_subsets(&mut ctx, &mut subset, 0, card, gap_limit);
        }
    }

    match ctx.best_assignment {
        None => IlpSolution {
            assignment: Vec::new(),
            objective: f64::INFINITY,
            status: if ctx.timed_out {
                IlpStatus::GapLimit
            } else {
                IlpStatus::Infeasible
            },
            gap: f64::INFINITY,
        },
        Some(assignment) => {
            let objective = problem.objective_of(&assignment);
            let gap = if ctx.timed_out {
                (objective - ctx.abandoned_bound).max(0.0)
            } else {
                0.0
            };
            IlpSolution {
                assignment,
                objective,
                status: if ctx.timed_out {
                    IlpStatus::GapLimit
                } else {
                    IlpStatus::Optimal
                },
                gap,
            }
        }
    }
}

fn enumerate_subsets(
    ctx: &mut SearchCtx,
    subset: &mut Vec<usize>,
    from: usize,
    card: Cardinality,
    gap_limit: f64,
) {
    if ctx.timed_out {
        return;
    }
    if subset.len() == card.n_clusters {
        search_subset(ctx, Some(subset.as_slice()), gap_limit);
        return;
    }
    let remaining = card.n_clusters - subset.len();
    for v in from..card.n_values {
        if card.n_values - v < remaining {
            break;
        }
        subset.push(v);
        enumerate_subsets(ctx, subset, v + 1, card, gap_limit);
        subset.pop();
    }
}

/// Inner DFS over rows. `active` restricts columns to the given value subset
/// and additionally requires every active value to be used at least once.
fn search_subset(ctx: &mut SearchCtx, active: Option<&[usize]>, gap_limit: f64) {
    let n_rows = ctx.problem.columns.len();

    // Admissible column indices per row under the value subset.
    let mut admissible: Vec<Vec<usize>> = Vec::with_capacity(n_rows);
    for cols in &ctx.problem.columns {
        let mut adm: Vec<usize> = (0..cols.len())
            .filter(|&k| match active {
                None => true,
                Some(set) => set.contains(&cols[k].value_id),
            })
            .collect();
        adm.sort_by(|&a, &b| cols[a].cost.total_cmp(&cols[b].cost).then(a.cmp(&b)));
        if adm.is_empty() {
            return; // some row cannot take any active value
        }
        admissible.push(adm);
    }

    let mut assignment = vec![usize::MAX; n_rows];
    let mut used_count = vec![0usize; active.map(|s| s.len()).unwrap_or(0)];
    let value_slot: Vec<Option<usize>> = match active {
        None => Vec::new(),
        Some(set) => {
            let max_v = ctx
                .problem
                .columns
                .iter()
                .flat_map(|c| c.iter().map(|col| col.value_id))
                .max()
                .unwrap_or(0);
            (0..=max_v)
                .map(|v| set.iter().position(|&s| s == v))
                .collect()
        }
    };

    // Per-coupling minimum contribution of each row among admissible columns.
    let row_min_coeff: Vec<Vec<f64>> = ctx
        .problem
        .couplings
        .iter()
        .map(|coupling| {
            (0..n_rows)
                .map(|r| {
                    admissible[r]
                        .iter()
                        .map(|&k| coupling.coeffs[r][k])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        })
        .collect();
    let order = ctx.order.clone();
    let zero_partial = vec![0.0; ctx.problem.couplings.len()];

    dfs(
        ctx,
        &order,
        &admissible,
        &row_min_coeff,
        &value_slot,
        active,
        &mut assignment,
        &mut used_count,
        0,
        0.0,
        &zero_partial,
        gap_limit,
    );
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    ctx: &mut SearchCtx,
    order: &[usize],
    admissible: &[Vec<usize>],
    row_min_coeff: &[Vec<f64>],
    value_slot: &[Option<usize>],
    active: Option<&[usize]>,
    assignment: &mut Vec<usize>,
    used_count: &mut Vec<usize>,
    depth: usize,
    partial_cost: f64,
    coupling_partial: &[f64],
    gap_limit: f64,
) {
    ctx.nodes += 1;
    if ctx.nodes.is_multiple_of(1024) {
        if let Some(deadline) = ctx.deadline {
            if Instant::now() >= deadline {
                ctx.timed_out = true;
            }
        }
    }

    let n_rows = order.len();
    if depth == n_rows {
        // Leaf: coverage and exclusion checks, then canonical re-summation.
        if active.is_some() && used_count.contains(&0) {
            return;
        }
        if let Some(excl) = &ctx.problem.excluded {
            if assignment == excl {
                return;
            }
        }
        let cost = ctx.problem.objective_of(assignment);
        if cost < ctx.best_cost - 1e-15 {
            ctx.best_cost = cost;
            ctx.best_assignment = Some(assignment.clone());
        }
        return;
    }

    // Lower bound: partial cost plus per-row minima among columns that stay
    // admissible when every other unassigned row contributes its coupling
    // minimum.
    let mut bound = partial_cost;
    let unassigned = &order[depth..];
    let mut min_tail: Vec<f64> = Vec::with_capacity(ctx.problem.couplings.len());
    for (ci, _) in ctx.problem.couplings.iter().enumerate() {
        min_tail.push(unassigned.iter().map(|&r| row_min_coeff[ci][r]).sum());
    }
    for &r in unassigned {
        let mut best = f64::INFINITY;
        'cols: for &k in &admissible[r] {
            for (ci, coupling) in ctx.problem.couplings.iter().enumerate() {
                let others = min_tail[ci] - row_min_coeff[ci][r];
                if coupling_partial[ci] + coupling.coeffs[r][k] + others > coupling.rhs + EPS {
                    continue 'cols;
                }
            }
            best = ctx.problem.columns[r][k].cost;
            break; // admissible columns are cost-sorted
        }
        if best == f64::INFINITY {
            return; // row has no column fitting the remaining slack
        }
        bound += best;
    }
    // Coverage bound: remaining rows must be able to cover unused values.
    if active.is_some() {
        let uncovered = used_count.iter().filter(|&&c| c == 0).count();
        if uncovered > n_rows - depth {
            return;
        }
    }
    // The slack only ever weakens pruning, so float rounding in the partial
    // sums cannot cut off a true optimum.
    if ctx.best_assignment.is_some() && bound >= ctx.best_cost - gap_limit + EPS {
        return;
    }
    if ctx.timed_out {
        ctx.abandoned_bound = ctx.abandoned_bound.min(bound);
        return;
    }

    let row = order[depth];
    for &k in &admissible[row] {
        let mut feasible = true;
        let mut next_partial = Vec::with_capacity(coupling_partial.len());
        for (ci, coupling) in ctx.problem.couplings.iter().enumerate() {
            let np = coupling_partial[ci] + coupling.coeffs[row][k];
            let others = min_tail[ci] - row_min_coeff[ci][row];
            if np + others > coupling.rhs + EPS {
                feasible = false;
                break;
            }
            next_partial.push(np);
        }
        if !feasible {
            continue;
        }
        assignment[row] = k;
        let slot = if active.is_some() {
            value_slot[ctx.problem.columns[row][k].value_id]
        } else {
            None
        };
        if let Some(s) = slot {
            used_count[s] += 1;
        }
        dfs(
            ctx,
            order,
            admissible,
            row_min_coeff,
            value_slot,
            active,
            assignment,
            used_count,
            depth + 1,
            partial_cost + ctx.problem.columns[row][k].cost,
            &next_partial,
            gap_limit,
        );
        if let Some(s) = slot {
            used_count[s] -= 1;
        }
        assignment[row] = usize::MAX;
    }
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Exhaustive enumeration reference: returns the optimal objective and
    /// one optimal assignment, or `None` when infeasible.
    pub fn enumerate(problem: &AssignmentIlp) -> Option<(f64, Vec<usize>)> {
        let n = problem.columns.len();
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut assignment = vec![0usize; n];
        loop {
            if problem.is_feasible(&assignment) {
                let cost = problem.objective_of(&assignment);
                if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    best = Some((cost, assignment.clone()));
                }
            }
            // odometer increment
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                assignment[i] += 1;
                if assignment[i] < problem.columns[i].len() {
                    break;
                }
                assignment[i] = 0;
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::enumerate;
    use super::*;
    use rand::RngExt;

    fn rounding_instance() -> AssignmentIlp {
        // Two parameters over {1,2,3}, target (2,2) excluded, costs |t-2|^2.
        let cols = |_r: usize| -> Vec<Column> {
            [1.0, 2.0, 3.0]
                .iter()
                .enumerate()
                .map(|(k, t)| Column {
                    value_id: k,
                    cost: (t - 2.0_f64).powi(2),
                })
                .collect()
        };
        AssignmentIlp {
            columns: vec![cols(0), cols(1)],
            couplings: vec![],
            cardinality: None,
            excluded: Some(vec![1, 1]),
        }
    }

    #[test]
    fn rounding_duplicate_exclusion() {
        let p = rounding_instance();
        let sol = solve_assignment(&p, 0.0, None);
        assert_eq!(sol.status, IlpStatus::Optimal);
        assert_eq!(sol.objective, 1.0);
        assert!(p.is_feasible(&sol.assignment));
        let (oracle_obj, _) = enumerate(&p).unwrap();
        assert_eq!(sol.objective, oracle_obj);
    }

    #[test]
    fn single_row_single_value() {
        let p = AssignmentIlp {
            columns: vec![vec![Column {
                value_id: 0,
                cost: 3.25,
            }]],
            ..Default::default()
        };
        let sol = solve_assignment(&p, 0.0, None);
        assert_eq!(sol.assignment, vec![0]);
        assert_eq!(sol.objective, 3.25);
    }

    #[test]
    fn clustering_three_patches_two_values() {
        // Patch 0 strongly prefers value 10 (id 1); patches 1-2 prefer 5 (id 0).
        let row = |c5: f64, c10: f64| {
            vec![
                Column {
                    value_id: 0,
                    cost: c5,
                },
                Column {
                    value_id: 1,
                    cost: c10,
                },
            ]
        };
        let p = AssignmentIlp {
            columns: vec![row(100.0, 1.0), row(1.0, 50.0), row(1.0, 50.0)],
            couplings: vec![],
            cardinality: Some(Cardinality {
                n_values: 2,
                n_clusters: 2,
            }),
            excluded: None,
        };
        let sol = solve_assignment(&p, 0.0, None);
        assert_eq!(sol.assignment, vec![1, 0, 0]);
        let (oracle_obj, oracle_assignment) = enumerate(&p).unwrap();
        assert_eq!(sol.objective, oracle_obj);
        assert_eq!(oracle_assignment, vec![1, 0, 0]);
    }

    #[test]
    fn infeasible_cardinality() {
        // One row cannot use two distinct values.
        let p = AssignmentIlp {
            columns: vec![vec![
                Column {
                    value_id: 0,
                    cost: 1.0,
                },
                Column {
                    value_id: 1,
                    cost: 2.0,
                },
            ]],
            couplings: vec![],
            cardinality: Some(Cardinality {
                n_values: 2,
                n_clusters: 2,
            }),
            excluded: None,
        };
        let sol = solve_assignment(&p, 0.0, None);
        assert_eq!(sol.status, IlpStatus::Infeasible);
    }

    #[test]
    fn coupling_restricts_choice() {
        // Two rows, values {0:cheap but heavy, 1:expensive but light};
        // weight budget forces at most one heavy pick.
        let row = || {
            vec![
                Column {
                    value_id: 0,
                    cost: 1.0,
                },
                Column {
                    value_id: 1,
                    cost: 5.0,
                },
            ]
        };
        let p = AssignmentIlp {
            columns: vec![row(), row()],
            couplings: vec![Coupling {
                coeffs: vec![vec![10.0, 1.0], vec![10.0, 1.0]],
                rhs: 11.0,
            }],
            cardinality: None,
            excluded: None,
        };
        let sol = solve_assignment(&p, 0.0, None);
        assert_eq!(sol.objective, 6.0);
        assert!(p.is_feasible(&sol.assignment));
        assert_eq!(sol.objective, enumerate(&p).unwrap().0);
    }

    fn random_instance(rng: &mut impl RngExt) -> AssignmentIlp {
        let n_values = rng.random_range(2..=4usize);
        let n_rows = rng.random_range(1..=4usize);
        // keep rows * values <= 20 binary variables
        let n_rows = n_rows.min(20 / n_values);
        let columns: Vec<Vec<Column>> = (0..n_rows)
            .map(|_| {
                (0..n_values)
                    .map(|v| Column {
                        value_id: v,
                        cost: rng.random_range(-5.0..5.0),
                    })
                    .collect()
            })
            .collect();
        let mut couplings = vec![];
        if rng.random_bool(0.5) {
            let coeffs: Vec<Vec<f64>> = (0..n_rows)
                .map(|_| (0..n_values).map(|_| rng.random_range(-2.0..4.0)).collect())
                .collect();
            couplings.push(Coupling {
                coeffs,
                rhs: rng.random_range(0.0..6.0),
            });
        }
        let cardinality = if rng.random_bool(0.4) && n_rows >= 2 {
            Some(Cardinality {
                n_values,
                n_clusters: rng.random_range(1..=n_rows.min(n_values)),
            })
        } else {
            None
        };
        let excluded = if rng.random_bool(0.4) {
            Some((0..n_rows).map(|_| rng.random_range(0..n_values)).collect())
        } else {
            None
        };
        AssignmentIlp {
            columns,
            couplings,
            cardinality,
            excluded,
        }
    }

    #[test]
    fn random_instances_match_enumeration() {
        let mut rng = crate::util::rng::stream(11, "ilp-unit", &[]);
        for _ in 0..60 {
            let p = random_instance(&mut rng);
            let sol = solve_assignment(&p, 0.0, None);
            match enumerate(&p) {
                None => assert_eq!(sol.status, IlpStatus::Infeasible),
                Some((obj, _)) => {
                    assert_eq!(sol.status, IlpStatus::Optimal);
                    assert_eq!(sol.objective, obj, "problem:\n{}", p.dump_lp());
                    assert!(p.is_feasible(&sol.assignment));
                    assert_eq!(sol.gap, 0.0);
                }
            }
        }
    }
}
