use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::rng::stream;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Hyperparameter optimization settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GprConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Optimize the noise variance as a hyperparameter; otherwise it stays
    /// at its initial value.
    pub optimize_noise: bool,
    /// Absolute noise variance override; `None` initializes the noise at
    /// `1e-6 * var(y)` for numerical stability.
    pub fixed_noise: Option<f64>,
    pub seed: u64,
}

impl Default for GprConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 200,
            optimize_noise: true,
            fixed_noise: None,
            seed: 0,
        }
    }
}

/// Vector-valued Gaussian process with a squared exponential ARD kernel and
/// zero prior mean. All `k` target columns share one covariance; the solve
/// `K^-1 (y - mu)` is precomputed so queries only evaluate the kernel.
#[derive(Debug, Clone)]
pub struct GprModel {
    pub x_train: DMatrix<f64>,
    pub y_train: DMatrix<f64>,
    pub log_sigma2: f64,
    pub log_length_scales: DVector<f64>,
    pub log_noise: f64,
    pub(crate) alpha: DMatrix<f64>,
    pub(crate) chol: Cholesky<f64, Dyn>,
    pub log_likelihood: f64,
}

/// Squared exponential ARD kernel between two points.
fn kernel(a: &[f64], b: &[f64], sigma2: f64, length_scales: &[f64]) -> f64 {
    let mut q = 0.0;
    for d in 0..a.len() {
        let diff = (a[d] - b[d]) / length_scales[d];
        q += diff * diff;
    }
    sigma2 * (-0.5 * q).exp()
}

/// Signal covariance matrix (no noise) between the rows of `x`.
fn kernel_matrix(x: &DMatrix<f64>, sigma2: f64, ls: &[f64]) -> DMatrix<f64> {
    let m = x.nrows();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = sigma2;
        for j in 0..i {
            let v = kernel(
                x.row(i).transpose().as_slice(),
                x.row(j).transpose().as_slice(),
                sigma2,
                ls,
            );
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Log marginal likelihood of the shared-kernel vector-valued GP and its
/// gradient in log-hyperparameter space `[log sigma2, log l_1..d, log noise]`.
pub fn log_likelihood_and_grad(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    log_sigma2: f64,
    log_length_scales: &[f64],
    log_noise: f64,
) -> Result<(f64, Vec<f64>)> {
    let m = x.nrows();
    let k_out = y.ncols() as f64;
    let sigma2 = log_sigma2.exp();
    let noise = log_noise.exp();
    let ls: Vec<f64> = log_length_scales.iter().map(|v| v.exp()).collect();

    let k_signal = kernel_matrix(x, sigma2, &ls);
    let mut k_full = k_signal.clone();
    for i in 0..m {
        k_full[(i, i)] += noise;
    }
    let chol = Cholesky::new(k_full)
        .ok_or_else(|| Error::Solver("covariance matrix not positive definite".into()))?;
    let alpha = chol.solve(y);
    let log_det: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let data_fit: f64 = y.iter().zip(alpha.iter()).map(|(yi, ai)| yi * ai).sum();
    let ll = -0.5 * (k_out * m as f64 * LN_2PI + k_out * log_det + data_fit);

    // gradient: 0.5 tr((alpha alpha^T - k K^-1) dK/dtheta)
    let k_inv = chol.inverse();
    let a = &alpha * alpha.transpose();
    let w = a - k_inv * k_out;

    let mut grad = Vec::with_capacity(2 + ls.len());
    // d/d log sigma2: dK = K_signal
    grad.push(
        0.5 * w
            .iter()
            .zip(k_signal.iter())
            .map(|(wi, ki)| wi * ki)
            .sum::<f64>(),
    );
    // d/d log l_d: dK_ij = K_signal_ij * (x_id - x_jd)^2 / l_d^2
    for d in 0..ls.len() {
        let inv_l2 = 1.0 / (ls[d] * ls[d]);
        let mut g = 0.0;
        for i in 0..m {
            for j in 0..m {
                let diff = x[(i, d)] - x[(j, d)];
                g += w[(i, j)] * k_signal[(i, j)] * diff * diff * inv_l2;
            }
        }
        grad.push(0.5 * g);
    }
    // d/d log noise: dK = noise I
    grad.push(0.5 * noise * w.diagonal().sum());

    Ok((ll, grad))
}

struct Theta {
    log_sigma2: f64,
    log_ls: Vec<f64>,
    log_noise: f64,
}

impl Theta {
    fn clamp(&mut self, y_scale: f64, noise_floor: f64, optimize_noise: bool) {
        let s_lo = (1e-8 * y_scale).max(1e-300).ln();
        let s_hi = (1e4 * y_scale).max(1e-290).ln();
        self.log_sigma2 = self.log_sigma2.clamp(s_lo, s_hi);
        // inputs are normalized to [0,1]: l = 10 is already effectively flat,
        // and larger scales only degrade the covariance conditioning
        for l in &mut self.log_ls {
            *l = l.clamp((1e-2f64).ln(), (1e1f64).ln());
        }
        if optimize_noise {
            let n_lo = noise_floor.ln();
            let n_hi = (y_scale.max(noise_floor * 10.0)).ln();
            self.log_noise = self.log_noise.clamp(n_lo, n_hi);
        }
    }
}

/// Fits the shared-kernel GP by multi-restart gradient ascent of the log
/// likelihood in log-hyperparameter space, with backtracking line search and
/// jitter escalation on Cholesky failure.
pub fn gpr_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, config: &GprConfig) -> Result<GprModel> {
    let m = x.nrows();
    let d = x.ncols();
    if m == 0 {
        return Err(Error::Data("gpr needs at least 1 sample".into()));
    }
    if y.nrows() != m {
        return Err(Error::Data("x and y row counts differ".into()));
    }

    let y_scale = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).max(0.0);
    if y_scale == 0.0 {
        // identically-zero targets (degenerate POD components): a fixed tiny
        // kernel keeps every prediction at the zero prior
        return finalize(
            x,
            y,
            Theta {
                log_sigma2: (1e-12f64).ln(),
                log_ls: vec![0.0; d],
                log_noise: (1e-12f64).ln(),
            },
        );
    }

    let noise_floor = 1e-10 * y_scale;
    let init_noise = match config.fixed_noise {
        Some(n) => n.max(noise_floor),
        None => 1e-6 * y_scale,
    };
    let optimize_noise = config.optimize_noise && config.fixed_noise.is_none();

    let mut best: Option<(f64, Theta)> = None;
    let mut rng = stream(config.seed, "gpr-restarts", &[m as u64, d as u64]);
    for restart in 0..config.restarts.max(1) {
        let mut theta = if restart == 0 {
            Theta {
                log_sigma2: y_scale.ln(),
                log_ls: vec![(0.5f64).ln(); d],
                log_noise: init_noise.ln(),
            }
        } else {
            Theta {
                log_sigma2: (y_scale * rng.random_range(0.1..10.0)).ln(),
                log_ls: (0..d)
                    .map(|_| rng.random_range(0.05f64..2.0).ln())
                    .collect(),
                log_noise: if optimize_noise {
                    (y_scale * 10f64.powf(rng.random_range(-8.0..-3.0))).ln()
                } else {
                    init_noise.ln()
                },
            }
        };
        theta.clamp(y_scale, noise_floor, optimize_noise);

        let mut ll = match eval_with_jitter(x, y, &mut theta) {
            Ok((ll, _)) => ll,
            Err(_) => continue,
        };
        let mut step = 0.1;
        for _ in 0..config.max_iters {
            let (_, grad) = match eval_with_jitter(x, y, &mut theta) {
                Ok(v) => v,
                Err(_) => break,
            };
            let g_inf = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            if g_inf < 1e-7 {
                break;
            }
            // backtracking line search along the gradient
            let mut improved = false;
            let mut t = step;
            for _ in 0..25 {
                let mut trial = Theta {
                    log_sigma2: theta.log_sigma2 + t * grad[0],
                    log_ls: (0..d).map(|i| theta.log_ls[i] + t * grad[1 + i]).collect(),
                    log_noise: if optimize_noise {
                        theta.log_noise + t * grad[1 + d]
                    } else {
                        theta.log_noise
                    },
                };
                trial.clamp(y_scale, noise_floor, optimize_noise);
                if let Ok((ll_new, _)) = eval_with_jitter(x, y, &mut trial) {
                    if ll_new > ll + 1e-12 {
                        theta = trial;
                        ll = ll_new;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
            step = (t * 1.5).min(1.0);
        }
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, theta));
        }
    }

    let (_, theta) =
        best.ok_or_else(|| Error::Solver("all gpr restarts failed Cholesky".into()))?;
    finalize(x, y, theta)
}

/// Evaluates the likelihood, escalating the noise floor (jitter) on Cholesky
/// failure: 1e-10 -> 1e-8 -> 1e-6 relative to the signal variance.
fn eval_with_jitter(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    theta: &mut Theta,
) -> Result<(f64, Vec<f64>)> {
    let mut attempt = 0;
    loop {
        match log_likelihood_and_grad(x, y, theta.log_sigma2, &theta.log_ls, theta.log_noise) {
            Ok(v) => return Ok(v),
            Err(e) => {
                if attempt >= 2 {
                    return Err(e);
                }
                let jitter = theta.log_sigma2.exp() * 10f64.powi(-10 + 2 * (attempt + 1));
                theta.log_noise = theta.log_noise.exp().max(jitter).ln();
                attempt += 1;
            }
        }
    }
}

fn finalize(x: &DMatrix<f64>, y: &DMatrix<f64>, theta: Theta) -> Result<GprModel> {
    let sigma2 = theta.log_sigma2.exp();
    let noise = theta.log_noise.exp();
    let ls: Vec<f64> = theta.log_ls.iter().map(|v| v.exp()).collect();
    let mut k = kernel_matrix(x, sigma2, &ls);
    for i in 0..x.nrows() {
        k[(i, i)] += noise;
    }
    let chol = Cholesky::new(k.clone())
        .ok_or_else(|| Error::Solver("final covariance not positive definite".into()))?;
    let mut alpha = chol.solve(y);
    // One step of iterative refinement: with near-zero noise the covariance
    // is ill-conditioned and the raw solve residual spoils interpolation.
    let residual = y - &k * &alpha;
    alpha += chol.solve(&residual);
    let log_det: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let data_fit: f64 = y.iter().zip(alpha.iter()).map(|(yi, ai)| yi * ai).sum();
    let ll = -0.5
        * (y.ncols() as f64 * x.nrows() as f64 * LN_2PI + y.ncols() as f64 * log_det + data_fit);
    Ok(GprModel {
        x_train: x.clone(),
        y_train: y.clone(),
        log_sigma2: theta.log_sigma2,
        log_length_scales: DVector::from_vec(theta.log_ls),
        log_noise: theta.log_noise,
        alpha,
        chol,
        log_likelihood: ll,
    })
}

impl GprModel {
    /// Rebuilds a model from stored training data and hyperparameters; the
    /// precomputed solve is recomputed deterministically, so predictions are
    /// bit-identical to the original fit.
    pub fn from_parts(
        x_train: DMatrix<f64>,
        y_train: DMatrix<f64>,
        log_sigma2: f64,
        log_length_scales: Vec<f64>,
        log_noise: f64,
    ) -> Result<Self> {
        finalize(
            &x_train,
            &y_train,
            Theta {
                log_sigma2,
                log_ls: log_length_scales,
                log_noise,
            },
        )
    }

    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.y_train.ncols()
    }

    pub fn sigma2(&self) -> f64 {
        self.log_sigma2.exp()
    }

    pub fn noise(&self) -> f64 {
        self.log_noise.exp()
    }

    pub fn length_scales(&self) -> Vec<f64> {
        self.log_length_scales.iter().map(|v| v.exp()).collect()
    }

    /// Kernel between two arbitrary points under the fitted hyperparameters.
    pub fn kernel_value(&self, a: &[f64], b: &[f64]) -> f64 {
        let ls = self.length_scales();
        kernel(a, b, self.sigma2(), &ls)
    }

    /// Posterior means (q x k) and latent variances (q) for a query batch.
    /// Negative variances are clamped at zero.
    pub fn predict(&self, xq: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if xq.ncols() != self.x_train.ncols() {
            return Err(Error::Data(format!(
                "query dimension {} does not match training dimension {}",
                xq.ncols(),
                self.x_train.ncols()
            )));
        }
        let sigma2 = self.sigma2();
        let ls = self.length_scales();
        let q = xq.nrows();
        let m = self.x_train.nrows();
        let mut kq = DMatrix::zeros(q, m);
        for i in 0..q {
            for j in 0..m {
                kq[(i, j)] = kernel(
                    xq.row(i).transpose().as_slice(),
                    self.x_train.row(j).transpose().as_slice(),
                    sigma2,
                    &ls,
                );
            }
        }
        let mean = &kq * &self.alpha;
        let w = self.chol.solve(&kq.transpose()); // m x q
        let mut var = DVector::zeros(q);
        for i in 0..q {
            let reduction: f64 = (0..m).map(|j| kq[(i, j)] * w[(j, i)]).sum();
            let v = sigma2 - reduction;
            if v < -1e-10 {
                eprintln!("warning: clamping negative gpr variance {v:.3e}");
            }
            var[i] = v.max(0.0);
        }
        Ok((mean, var))
    }

    /// Single-point posterior with analytic input gradients, for acquisition
    /// maximization. Returns (mean_k0, variance, dmean/dx, dvariance/dx);
    /// only the first output column's mean is differentiated (the BO
    /// objective GP has exactly one output).
    pub fn predict_scalar_with_grad(&self, x: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let sigma2 = self.sigma2();
        let ls = self.length_scales();
        let m = self.x_train.nrows();
        let d = x.len();
        let mut k_star = DVector::zeros(m);
        for j in 0..m {
            k_star[j] = kernel(x, self.x_train.row(j).transpose().as_slice(), sigma2, &ls);
        }
        let mean = (0..m).map(|j| k_star[j] * self.alpha[(j, 0)]).sum::<f64>();
        let w = self.chol.solve(&k_star);
        let var = (sigma2 - k_star.dot(&w)).max(0.0);

        let mut dmean = vec![0.0; d];
        let mut dvar = vec![0.0; d];
        for dim in 0..d {
            let inv_l2 = 1.0 / (ls[dim] * ls[dim]);
            let mut dm = 0.0;
            let mut dv = 0.0;
            for j in 0..m {
                let dk = k_star[j] * (-(x[dim] - self.x_train[(j, dim)]) * inv_l2);
                dm += dk * self.alpha[(j, 0)];
                dv += -2.0 * w[j] * dk;
            }
            dmean[dim] = dm;
            dvar[dim] = dv;
        }
        (mean, var, dmean, dvar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data() -> (DMatrix<f64>, DMatrix<f64>) {
        // y = x on 5 points in [0, 1]
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let x = DMatrix::from_fn(5, 1, |i, _| xs[i]);
        let y = DMatrix::from_fn(5, 1, |i, _| xs[i]);
        (x, y)
    }

    #[test]
    fn kernel_at_zero_distance_is_sigma2() {
        let a = [0.3, 0.7];
        assert!((kernel(&a, &a, 2.5, &[0.4, 0.9]) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn interpolates_training_points_under_jitter_noise() {
        let (x, y) = line_data();
        let cfg = GprConfig {
            fixed_noise: Some(1e-10),
            ..Default::default()
        };
        let model = gpr_fit(&x, &y, &cfg).unwrap();
        let (mean, var) = model.predict(&x).unwrap();
        let scale = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
        for i in 0..5 {
            let denom = y[(i, 0)].abs().max(scale);
            assert!(
                (mean[(i, 0)] - y[(i, 0)]).abs() / denom < 1e-6,
                "pred {} vs {}",
                mean[(i, 0)],
                y[(i, 0)]
            );
            assert!(var[i] <= model.noise() + 1e-8);
        }
    }

    #[test]
    fn far_queries_revert_to_the_zero_prior() {
        let (x, y) = line_data();
        let model = gpr_fit(&x, &y, &GprConfig::default()).unwrap();
        let far = DMatrix::from_row_slice(1, 1, &[1e4]);
        let (mean, var) = model.predict(&far).unwrap();
        assert!(mean[(0, 0)].abs() < 1e-6);
        assert!((var[0] - model.sigma2()).abs() < 1e-9 * model.sigma2().max(1.0));
    }

    #[test]
    fn batch_prediction_equals_single_calls() {
        let (x, y) = line_data();
        let model = gpr_fit(&x, &y, &GprConfig::default()).unwrap();
        let queries = [0.1, 0.42, 0.9];
        let batch = DMatrix::from_fn(3, 1, |i, _| queries[i]);
        let (mb, vb) = model.predict(&batch).unwrap();
        for (i, &q) in queries.iter().enumerate() {
            let single = DMatrix::from_row_slice(1, 1, &[q]);
            let (ms, vs) = model.predict(&single).unwrap();
            assert!((mb[(i, 0)] - ms[(0, 0)]).abs() < 1e-12);
            assert!((vb[i] - vs[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = crate::util::rng::stream(9, "gpr-grad", &[]);
        let m = 8;
        let d = 3;
        let x = DMatrix::from_fn(m, d, |_, _| rng.random_range(0.0..1.0));
        let y = DMatrix::from_fn(m, 2, |i, _| f64::sin(x[(i, 0)] * 3.0) + x[(i, 1)]);
        for _ in 0..10 {
            let log_s2 = rng.random_range(-1.0..1.0);
            let log_ls: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..0.5)).collect();
            let log_noise = rng.random_range(-6.0..-2.0);
            let (_, grad) = log_likelihood_and_grad(&x, &y, log_s2, &log_ls, log_noise).unwrap();

            let h = 1e-5;
            let check = |idx: usize, fd: f64| {
                let denom = fd.abs().max(grad[idx].abs()).max(1e-8);
                assert!(
                    (grad[idx] - fd).abs() / denom < 1e-4,
                    "component {idx}: analytic {} vs fd {fd}",
                    grad[idx]
                );
            };
            let ll =
                |s2: f64, ls: &[f64], n: f64| log_likelihood_and_grad(&x, &y, s2, ls, n).unwrap().0;
            check(
                0,
                (ll(log_s2 + h, &log_ls, log_noise) - ll(log_s2 - h, &log_ls, log_noise))
                    / (2.0 * h),
            );
            for dim in 0..d {
                let mut up = log_ls.clone();
                up[dim] += h;
                let mut dn = log_ls.clone();
                dn[dim] -= h;
                check(
                    1 + dim,
                    (ll(log_s2, &up, log_noise) - ll(log_s2, &dn, log_noise)) / (2.0 * h),
                );
            }
            check(
                1 + d,
                (ll(log_s2, &log_ls, log_noise + h) - ll(log_s2, &log_ls, log_noise - h))
                    / (2.0 * h),
            );
        }
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let (x, y) = line_data();
        let model = gpr_fit(&x, &y, &GprConfig::default()).unwrap();
        let x0 = [0.37];
        let (_, _, dmean, dvar) = model.predict_scalar_with_grad(&x0);
        let h = 1e-6;
        let at = |v: f64| {
            let q = DMatrix::from_row_slice(1, 1, &[v]);
            let (m, var) = model.predict(&q).unwrap();
            (m[(0, 0)], var[0])
        };
        let (m_up, v_up) = at(x0[0] + h);
        let (m_dn, v_dn) = at(x0[0] - h);
        let fd_mean = (m_up - m_dn) / (2.0 * h);
        let fd_var = (v_up - v_dn) / (2.0 * h);
        assert!((dmean[0] - fd_mean).abs() < 1e-4 * fd_mean.abs().max(1.0));
        assert!((dvar[0] - fd_var).abs() < 1e-4 * fd_var.abs().max(1.0));
    }

    #[test]
    fn zero_targets_fast_path_predicts_zero() {
        let x = DMatrix::from_fn(4, 2, |i, j| (i + j) as f64 / 4.0);
        let y = DMatrix::zeros(4, 3);
        let model = gpr_fit(&x, &y, &GprConfig::default()).unwrap();
        let (mean, _) = model.predict(&x).unwrap();
        assert!(mean.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let x = DMatrix::zeros(0, 2);
        let y = DMatrix::zeros(0, 1);
        assert!(gpr_fit(&x, &y, &GprConfig::default()).is_err());
    }
}
