/// One candidate refinement of a parameterized section: applying it creates
/// `clusters - 1` new parameters and is worth `value` (objective improvement,
/// in tons-equivalent).
#[derive(Debug, Clone, Copy)]
pub struct KnapsackItem {
    pub clusters: usize,
    pub value: f64,
}

/// Exact grouped knapsack over refinement candidates.
///
/// `groups[g]` holds the candidate refinements of section `g`; at most one
/// may be chosen per group, and every group has an implicit "no refinement"
/// option with zero cost and zero value. The budget limits the total number
/// of added parameters, `sum(clusters - 1)`. Ties in total value break toward
/// fewer added parameters. Returns the chosen item index per group.
pub fn solve_knapsack(groups: &[Vec<KnapsackItem>], budget_added: usize) -> Vec<Option<usize>> {
    debug_assert!(groups.iter().flatten().all(|it| it.clusters >= 1));
    let b = budget_added;
    // dp[a] = best (value, added) achievable with exactly `a` added params.
    #[derive(Clone, Copy)]
    struct Cell {
        value: f64,
        reachable: bool,
    }
    let mut dp = vec![
        Cell {
            value: f64::NEG_INFINITY,
            reachable: false
        };
        b + 1
    ];
    dp[0] = Cell {
        value: 0.0,
        reachable: true,
    };
    // choice[g][a] = item picked for group g when arriving at level a.
    let mut choice: Vec<Vec<Option<usize>>> = Vec::with_capacity(groups.len());

    for group in groups {
        let prev = dp.clone();
        let mut pick = vec![None; b + 1];
        let mut next = prev.clone(); // no-op keeps the level and value
        for (idx, item) in group.iter().enumerate() {
            let added = item.clusters.saturating_sub(1);
            if item.value <= 0.0 || added > b {
                continue; // must improve the objective and fit the budget
            }
            for a in 0..=b - added {
                if !prev[a].reachable {
                    continue;
                }
                let cand = prev[a].value + item.value;
                let target = &mut next[a + added];
                if !target.reachable || cand > target.value {
                    *target = Cell {
                        value: cand,
                        reachable: true,
                    };
                    pick[a + added] = Some(idx);
                }
            }
        }
        dp = next;
        choice.push(pick);
    }

    // Best value over all levels, ties toward fewer added parameters.
    let mut best_a = 0usize;
    for a in 0..=b {
        if dp[a].reachable && dp[a].value > dp[best_a].value + 1e-12 {
            best_a = a;
        }
    }

    // Walk back through the groups reconstructing the choices.
    let mut selected = vec![None; groups.len()];
    let mut level = best_a;
    for g in (0..groups.len()).rev() {
        if let Some(idx) = choice[g][level] {
            selected[g] = Some(idx);
            level -= groups[g][idx].clusters - 1;
        }
    }
    selected
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(clusters: usize, value: f64) -> KnapsackItem {
        KnapsackItem { clusters, value }
    }

    #[test]
    fn zero_budget_selects_nothing() {
        let groups = vec![vec![item(2, 10.0)], vec![item(3, 4.0)]];
        assert_eq!(solve_knapsack(&groups, 0), vec![None, None]);
    }

    #[test]
    fn picks_two_best_of_three() {
        let groups = vec![vec![item(2, 10.0)], vec![item(2, 7.0)], vec![item(2, 6.0)]];
        let sel = solve_knapsack(&groups, 2);
        assert_eq!(sel, vec![Some(0), Some(0), None]);
    }

    #[test]
    fn negative_value_never_selected() {
        let groups = vec![vec![item(2, -3.0)]];
        assert_eq!(solve_knapsack(&groups, 5), vec![None]);
    }

    #[test]
    fn prefers_fewer_added_params_on_value_tie() {
        // Both options worth 5.0; the 2-cluster one adds fewer parameters.
        let groups = vec![vec![item(4, 5.0), item(2, 5.0)]];
        assert_eq!(solve_knapsack(&groups, 5), vec![Some(1)]);
    }

    /// Brute force over all option combinations, no-ops included.
    pub(crate) fn enumerate_best(groups: &[Vec<KnapsackItem>], budget: usize) -> f64 {
        let n = groups.len();
        let mut best_value = 0.0_f64;
        let mut combo = vec![0usize; n]; // 0 = no-op, i+1 = item i
        loop {
            let mut value = 0.0;
            let mut added = 0usize;
            for (g, &c) in combo.iter().enumerate() {
                if c > 0 {
                    let it = groups[g][c - 1];
                    value += it.value;
                    added += it.clusters - 1;
                }
            }
            if added <= budget && value > best_value {
                best_value = value;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best_value;
                }
                combo[i] += 1;
                if combo[i] <= groups[i].len() {
                    break;
                }
                combo[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let mut rng = crate::util::rng::stream(3, "knapsack-unit", &[]);
        use rand::RngExt;
        for _ in 0..50 {
            let n_groups = rng.random_range(1..=4usize);
            let groups: Vec<Vec<KnapsackItem>> = (0..n_groups)
                .map(|_| {
                    (0..rng.random_range(1..=3usize))
                        .map(|_| item(rng.random_range(2..=4usize), rng.random_range(-2.0..8.0)))
                        .collect()
                })
                .collect();
            let budget = rng.random_range(0..=6usize);
            let sel = solve_knapsack(&groups, budget);

            let sel_value: f64 = sel
                .iter()
                .enumerate()
                .filter_map(|(g, &s)| s.map(|idx| groups[g][idx].value))
                .sum();
            let sel_added: usize = sel
                .iter()
                .enumerate()
                .filter_map(|(g, &s)| s.map(|idx| groups[g][idx].clusters - 1))
                .sum();
            assert!(sel_added <= budget);
            let best = enumerate_best(&groups, budget);
            assert!(
                (sel_value - best).abs() < 1e-9,
                "got {sel_value}, oracle {best}"
            );
        }
    }
}
