use serde::{Deserialize, Serialize};

use crate::util::stats::{normal_cdf, normal_pdf};

/// Acquisition function family; the rotation order on stagnation is
/// NLCB -> EI -> PI -> NLCB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcquisitionKind {
    Nlcb,
    Ei,
    Pi,
}

impl AcquisitionKind {
    pub fn next(&self) -> Self {
        match self {
            AcquisitionKind::Nlcb => AcquisitionKind::Ei,
            AcquisitionKind::Ei => AcquisitionKind::Pi,
            AcquisitionKind::Pi => AcquisitionKind::Nlcb,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AcquisitionKind::Nlcb => "nlcb",
            AcquisitionKind::Ei => "ei",
            AcquisitionKind::Pi => "pi",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Optimism weight of the negative lower confidence bound.
    pub beta: f64,
    /// Minimum improvement (t) demanded by the probability of improvement.
    pub epsilon: f64,
    /// Non-improving iterations before rotating to the next acquisition.
    pub switch_patience: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            epsilon: 0.1,
            switch_patience: 100,
        }
    }
}

/// Acquisition value for a minimization problem; larger is more promising.
/// `y_star` is the incumbent objective.
pub fn acquisition(
    kind: AcquisitionKind,
    mu: f64,
    sigma: f64,
    y_star: f64,
    cfg: &AcquisitionConfig,
) -> f64 {
    debug_assert!(sigma >= 0.0);
    match kind {
        AcquisitionKind::Nlcb => -(mu - cfg.beta * sigma),
        AcquisitionKind::Ei => {
            if sigma == 0.0 {
                (y_star - mu).max(0.0)
            } else {
                let u = (y_star - mu) / sigma;
                (y_star - mu) * normal_cdf(u) + sigma * normal_pdf(u)
            }
        }
        AcquisitionKind::Pi => {
            if sigma == 0.0 {
                if y_star - cfg.epsilon - mu > 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                normal_cdf((y_star - cfg.epsilon - mu) / sigma)
            }
        }
    }
}

/// Partial derivatives of the acquisition with respect to the posterior mean
/// and standard deviation, for chaining with the GP input gradients.
pub fn acquisition_grad_mu_sigma(
    kind: AcquisitionKind,
    mu: f64,
    sigma: f64,
    y_star: f64,
    cfg: &AcquisitionConfig,
) -> (f64, f64) {
    match kind {
        AcquisitionKind::Nlcb => (-1.0, cfg.beta),
        AcquisitionKind::Ei => {
            if sigma == 0.0 {
                (if y_star > mu { -1.0 } else { 0.0 }, 0.0)
            } else {
                let u = (y_star - mu) / sigma;
                (-normal_cdf(u), normal_pdf(u))
            }
        }
        AcquisitionKind::Pi => {
            if sigma == 0.0 {
                (0.0, 0.0)
            } else {
                let u = (y_star - cfg.epsilon - mu) / sigma;
                let phi = normal_pdf(u);
                (-phi / sigma, -phi * u / sigma)
            }
        }
    }
}
