use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use super::acquisition::{
    acquisition, acquisition_grad_mu_sigma, AcquisitionConfig, AcquisitionKind,
};
use super::LinearConstraints;
use crate::error::{Error, Result};
use crate::model::ParameterSpace;
use crate::rom::GprModel;
use crate::util::rng::stream;

const FEAS_TOL: f64 = 1e-9;

/// Box-plus-halfspace feasible region in normalized coordinates.
struct NormalizedPolytope {
    dim: usize,
    /// halfspaces a^T x <= b, zero rows dropped
    halfspaces: Vec<(Vec<f64>, f64)>,
}

impl NormalizedPolytope {
    /// Transforms the mm-space mass and VCG rows into the unit box.
    /// x_mm = lo + x_n * range.
    fn build(space: &ParameterSpace, constraints: &LinearConstraints, f_incumbent: f64) -> Self {
        let dim = space.n_params();
        let lo: Vec<f64> = space.params.iter().map(|p| p.domain[0]).collect();
        let range: Vec<f64> = space
            .params
            .iter()
            .map(|p| p.domain.last().unwrap() - p.domain[0])
            .collect();
        let mut halfspaces = Vec::new();
        let mut push = |a_mm: &[f64], b_mm: f64| {
            let a_n: Vec<f64> = a_mm.iter().zip(&range).map(|(a, r)| a * r).collect();
            let b_n = b_mm - a_mm.iter().zip(&lo).map(|(a, l)| a * l).sum::<f64>();
            if a_n.iter().any(|&v| v != 0.0) {
                halfspaces.push((a_n, b_n));
            }
        };
        // incumbent mass bound: d . x <= f(x*) - m_fixed
        push(&constraints.d, f_incumbent - constraints.m_fixed);
        // vcg bound: sum coeff_i x_i <= rhs
        push(&constraints.vcg_coeff, constraints.vcg_rhs);
        Self { dim, halfspaces }
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in &self.halfspaces {
            let lhs: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
            worst = worst.max(lhs - b);
        }
        for &xi in x {
            worst = worst.max(-xi).max(xi - 1.0);
        }
        worst
    }

    fn feasible(&self, x: &[f64]) -> bool {
        self.violation(x) <= FEAS_TOL
    }

    /// Alternating box clamp and half-space projection.
    fn project(&self, x: &mut [f64]) {
        for _ in 0..100 {
            for xi in x.iter_mut() {
                *xi = xi.clamp(0.0, 1.0);
            }
            let mut ok = true;
            for (a, b) in &self.halfspaces {
                let lhs: f64 = a.iter().zip(x.iter()).map(|(ai, xi)| ai * xi).sum();
                if lhs > *b + FEAS_TOL {
                    ok = false;
                    let norm2: f64 = a.iter().map(|v| v * v).sum();
                    let scale = (lhs - b) / norm2;
                    for (xi, ai) in x.iter_mut().zip(a) {
                        *xi -= scale * ai;
                    }
                }
            }
            if ok && x.iter().all(|&v| (0.0..=1.0).contains(&v)) {
                return;
            }
        }
    }

    /// Certain emptiness test: a half-space no box corner can satisfy.
    fn certainly_empty(&self) -> bool {
        self.halfspaces.iter().any(|(a, b)| {
            let min_lhs: f64 = a.iter().map(|&ai| if ai < 0.0 { ai } else { 0.0 }).sum();
            min_lhs > b + FEAS_TOL
        })
    }
}

/// Maximizes the acquisition over the domain box intersected with the
/// incumbent-mass and VCG half-spaces, by multi-start projected-gradient
/// ascent with analytic gradients. Returns a feasible continuous point in
/// mm. Fails with `Exhausted` when no feasible start can be found.
#[allow(clippy::too_many_arguments)]
pub fn maximize_acquisition(
    objective_gp: &GprModel,
    kind: AcquisitionKind,
    acq_cfg: &AcquisitionConfig,
    y_star: f64,
    space: &ParameterSpace,
    constraints: &LinearConstraints,
    f_incumbent: f64,
    incumbent_norm: Option<&[f64]>,
    seed: u64,
    n_starts: usize,
) -> Result<Vec<f64>> {
    let poly = NormalizedPolytope::build(space, constraints, f_incumbent);
    if poly.certainly_empty() {
        return Err(Error::Exhausted("feasible polytope is empty".into()));
    }
    let d = poly.dim;
    let mut rng: ChaCha8Rng = stream(seed, "acq-maximize", &[d as u64]);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let mut tries = 0;
    while starts.len() < n_starts && tries < n_starts * 200 {
        tries += 1;
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        if poly.feasible(&x) {
            starts.push(x);
        }
    }
    if let Some(inc) = incumbent_norm {
        for _ in 0..(n_starts / 3).max(1) {
            let mut x: Vec<f64> = inc
                .iter()
                .map(|&v| v + rng.random_range(-0.1..0.1))
                .collect();
            poly.project(&mut x);
            if poly.feasible(&x) {
                starts.push(x);
            }
        }
    }
    if starts.is_empty() {
        // fall back to projecting random points before giving up
        for _ in 0..200 {
            let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            poly.project(&mut x);
            if poly.feasible(&x) {
                starts.push(x);
                break;
            }
        }
    }
    if starts.is_empty() {
        return Err(Error::Exhausted(
            "no feasible acquisition start found".into(),
        ));
    }

    let eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let (mu, var, dmu, dvar) = objective_gp.predict_scalar_with_grad(x);
        let sigma = var.max(0.0).sqrt();
        let value = acquisition(kind, mu, sigma, y_star, acq_cfg);
        let (g_mu, g_sigma) = acquisition_grad_mu_sigma(kind, mu, sigma, y_star, acq_cfg);
        let grad: Vec<f64> = (0..x.len())
            .map(|i| {
                let dsigma = if sigma > 1e-12 {
                    dvar[i] / (2.0 * sigma)
                } else {
                    0.0
                };
                g_mu * dmu[i] + g_sigma * dsigma
            })
            .collect();
        (value, grad)
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mut x in starts {
        let (mut value, mut grad) = eval(&x);
        let mut step = 0.25;
        for _ in 0..100 {
            let g_norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if g_norm < 1e-10 {
                break;
            }
            let mut improved = false;
            let mut t = step;
            for _ in 0..12 {
                let mut trial: Vec<f64> = x
                    .iter()
                    .zip(&grad)
                    .map(|(xi, gi)| xi + t * gi / g_norm)
                    .collect();
                poly.project(&mut trial);
                if poly.feasible(&trial) {
                    let (v_new, g_new) = eval(&trial);
                    if v_new > value + 1e-14 {
                        x = trial;
                        value = v_new;
                        grad = g_new;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
            step = (t * 2.0).min(0.5);
        }
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            best = Some((value, x));
        }
    }

    let (_, mut x) = best.unwrap();
    poly.project(&mut x);
    debug_assert!(poly.feasible(&x));
    // denormalize to mm
    Ok(x.iter()
        .zip(&space.params)
        .map(|(xn, p)| {
            let lo = p.domain[0];
            let hi = *p.domain.last().unwrap();
            lo + xn * (hi - lo)
        })
        .collect())
}
