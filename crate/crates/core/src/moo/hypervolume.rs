use super::sort::pareto_indices;

/// Exact dominated hypervolume of a minimization point set with respect to a
/// reference point, by recursive objective slicing with dominated-point
/// pruning at every level. Points not strictly better than the reference in
/// some coordinate contribute only their clipped box.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let k = reference.len();
    let pts: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(a, r)| a < r))
        .cloned()
        .collect();
    hv_recurse(pts, reference, k)
}

fn hv_recurse(points: Vec<Vec<f64>>, reference: &[f64], k: usize) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    if k == 1 {
        let best = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        return (reference[0] - best).max(0.0);
    }
    // prune dominated points; they never change the union volume
    let keep = pareto_indices(&points);
    let mut pts: Vec<Vec<f64>> = keep.into_iter().map(|i| points[i].clone()).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    pts.dedup();

    let mut volume = 0.0;
    for i in 0..pts.len() {
        let x_lo = pts[i][0];
        let x_hi = if i + 1 < pts.len() {
            pts[i + 1][0]
        } else {
            reference[0]
        };
        let width = x_hi - x_lo;
        if width <= 0.0 {
            continue;
        }
        let slab: Vec<Vec<f64>> = pts[..=i].iter().map(|p| p[1..].to_vec()).collect();
        volume += width * hv_recurse(slab, &reference[1..], k - 1);
    }
    volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn two_dimensional_staircase() {
        // boxes to (4,4): points (1,3), (2,2), (3,1)
        let pts = vec![vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]];
        let hv = hypervolume(&pts, &[4.0, 4.0]);
        // union: 3x1 + 2x1 + 1x2 rows = strips: x in [1,2): depth 1; [2,3): 2; [3,4): 3
        // computed by slicing: 1*(4-3=1)+1*(4-2=2)+1*(4-1=3) = 6
        assert!((hv - 6.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_box() {
        let pts = vec![vec![0.5, 0.5, 0.5]];
        assert!((hypervolume(&pts, &[1.0, 1.0, 1.0]) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn points_outside_the_reference_are_ignored() {
        let pts = vec![vec![2.0, 0.0], vec![0.25, 0.25]];
        let hv = hypervolume(&pts, &[1.0, 1.0]);
        assert!((hv - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn dominated_points_do_not_change_the_volume() {
        let pts = vec![vec![0.2, 0.2, 0.2], vec![0.5, 0.5, 0.5]];
        let only = vec![vec![0.2, 0.2, 0.2]];
        let r = [1.0, 1.0, 1.0];
        assert!((hypervolume(&pts, &r) - hypervolume(&only, &r)).abs() < 1e-12);
    }

    #[test]
    fn matches_monte_carlo_on_random_sets() {
        let mut rng = crate::util::rng::stream(41, "hv-unit", &[]);
        for k in [2usize, 3, 4] {
            let n = 8;
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let reference = vec![1.0; k];
            let exact = hypervolume(&pts, &reference);
            let samples = 200_000;
            let mut hits = 0usize;
            for _ in 0..samples {
                let q: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
                if pts.iter().any(|p| p.iter().zip(&q).all(|(a, b)| a <= b)) {
                    hits += 1;
                }
            }
            let mc = hits as f64 / samples as f64;
            assert!((exact - mc).abs() < 0.01, "k={k}: exact {exact} vs mc {mc}");
        }
    }
}
