//! Post-processing of stress snapshots into element failure states and the
//! five scalar quantities of interest, plus the penalized mass objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    vertical_deflection, Configuration, Element, Material, ParameterSpace, Patch, StressSnapshot,
};

/// Allowable stresses (MPa). Defaults are the high-strength structural steel
/// values; experiments may configure lower criticals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct YieldThresholds {
    pub direct: f64,
    pub shear: f64,
    pub von_mises: f64,
}

impl Default for YieldThresholds {
    fn default() -> Self {
        Self {
            direct: 245.0,
            shear: 153.0,
            von_mises: 307.0,
        }
    }
}

/// Penalty and QoI constants of one optimization problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Yield-count penalty weight (t per count²).
    pub c_y: f64,
    /// Buckle-count penalty weight (t per count²).
    pub c_b: f64,
    pub y_crit: usize,
    pub b_crit: usize,
    /// Average mass of one reinforcement bar (t), charged per buckled element.
    pub m_bar: f64,
    /// Mass of everything not controlled by a parameter (t).
    pub m_fixed: f64,
    /// VCG of the fixed mass (m).
    pub vcg_fixed: f64,
    /// Hard upper bound on the structural VCG (m).
    pub vcg_crit: f64,
    /// Optional deflection threshold (mm); enables an extra quadratic penalty.
    #[serde(default)]
    pub deflection_crit: Option<f64>,
    /// Deflection penalty weight (t per mm²), used only with `deflection_crit`.
    #[serde(default = "default_c_deflection")]
    pub c_deflection: f64,
    #[serde(default)]
    pub yield_thresholds: YieldThresholds,
}

fn default_c_deflection() -> f64 {
    1.0
}

/// The five scalar quantities of interest of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoiVector {
    pub n_y: usize,
    pub n_b: usize,
    /// mm
    pub deflection: f64,
    /// t
    pub mass: f64,
    /// m
    pub vcg: f64,
}

impl QoiVector {
    /// Objective-space point, minimization on every column.
    pub fn as_objectives(&self) -> [f64; 5] {
        [
            self.n_y as f64,
            self.n_b as f64,
            self.deflection,
            self.mass,
            self.vcg,
        ]
    }
}

/// Element failure verdicts aggregated over the load cases.
#[derive(Debug, Clone)]
pub struct FailureState {
    pub yielded: Vec<bool>,
    pub buckled: Vec<bool>,
    /// Maximum usage factor per element over load cases, per kind
    /// (longitudinal, transverse, shear).
    pub usage_factors: Vec<[f64; 3]>,
}

impl FailureState {
    pub fn n_yielded(&self) -> usize {
        self.yielded.iter().filter(|&&y| y).count()
    }
    pub fn n_buckled(&self) -> usize {
        self.buckled.iter().filter(|&&b| b).count()
    }
}

/// Von Mises equivalent stress of a six-component tensor
/// (sigma_x, sigma_y, sigma_z, tau_xy, tau_xz, tau_yz).
pub fn von_mises(t: &[f64; 6]) -> f64 {
    let (sx, sy, sz, txy, txz, tyz) = (t[0], t[1], t[2], t[3], t[4], t[5]);
    (((sx - sy).powi(2) + (sy - sz).powi(2) + (sz - sx).powi(2)) / 2.0
        + 3.0 * (txy * txy + txz * txz + tyz * tyz))
        .sqrt()
}

/// True when any direct, shear or von Mises allowable is exceeded.
pub fn check_yield(tensor: &[f64; 6], thresholds: &YieldThresholds) -> bool {
    tensor[..3].iter().any(|s| s.abs() > thresholds.direct)
        || tensor[3..].iter().any(|t| t.abs() > thresholds.shear)
        || von_mises(tensor) > thresholds.von_mises
}

/// Usage factors (longitudinal, transverse, shear) of a simply-supported
/// elastic plate: compressive direct stress against
/// `k pi^2 E / (12 (1 - nu^2)) (t/b)^2` with k = 4, and shear against the
/// same form with `k_s = 5.34 + 4 (b/a)^2`. The element is buckled when any
/// factor exceeds 1 in any load case.
pub fn check_buckling(
    tensor: &[f64; 6],
    element: &Element,
    thickness_mm: f64,
    material: &Material,
) -> Result<[f64; 3]> {
    if thickness_mm <= 0.0 || element.panel_width_b <= 0.0 || element.panel_length_a <= 0.0 {
        return Err(Error::Domain(format!(
            "non-positive buckling geometry on element {}: t={thickness_mm}, b={}, a={}",
            element.id, element.panel_width_b, element.panel_length_a
        )));
    }
    let t_over_b = thickness_mm * 1e-3 / element.panel_width_b;
    let base = std::f64::consts::PI.powi(2) * material.youngs_modulus
        / (12.0 * (1.0 - material.poisson * material.poisson))
        * t_over_b
        * t_over_b;
    let sigma_cr = 4.0 * base;
    let b_over_a = element.panel_width_b / element.panel_length_a;
    let tau_cr = (5.34 + 4.0 * b_over_a * b_over_a) * base;
    Ok([
        (-tensor[0]).max(0.0) / sigma_cr,
        (-tensor[1]).max(0.0) / sigma_cr,
        tensor[3].abs() / tau_cr,
    ])
}

/// Per-element yield/buckle verdicts for a full snapshot, OR-ed over the
/// load cases.
pub fn evaluate_failures(
    snapshot: &StressSnapshot,
    elements: &[Element],
    thickness_mm: &[f64],
    material: &Material,
    thresholds: &YieldThresholds,
) -> Result<FailureState> {
    let n = elements.len();
    if snapshot.n_elements() != n || thickness_mm.len() != n {
        return Err(Error::Data(format!(
            "inconsistent element counts: snapshot {}, mesh {}, thickness {}",
            snapshot.n_elements(),
            n,
            thickness_mm.len()
        )));
    }
    let mut yielded = vec![false; n];
    let mut buckled = vec![false; n];
    let mut usage = vec![[0.0f64; 3]; n];
    for case in &snapshot.cases {
        for e in 0..n {
            let tensor = case.tensor(e);
            if !yielded[e] && check_yield(&tensor, thresholds) {
                yielded[e] = true;
            }
            let eta = check_buckling(&tensor, &elements[e], thickness_mm[e], material)?;
            for k in 0..3 {
                usage[e][k] = usage[e][k].max(eta[k]);
            }
        }
    }
    for e in 0..n {
        buckled[e] = usage[e].iter().any(|&u| u > 1.0);
    }
    Ok(FailureState {
        yielded,
        buckled,
        usage_factors: usage,
    })
}

/// Controllable mass and its first moment, accumulated in patch-id order so
/// the result is bit-identical across reparameterizations: a lifted
/// configuration assigns every patch the same thickness as its coarse
/// original, and the summation order does not depend on how patches are
/// grouped into parameters.
fn patch_mass_terms(
    config: &Configuration,
    space: &ParameterSpace,
    patches: &[Patch],
) -> (f64, f64) {
    let mut per_patch = vec![0.0f64; patches.len()];
    for (p, x) in space.params.iter().zip(&config.values) {
        for &pid in &p.patch_ids {
            per_patch[pid] = patches[pid].linear_density_coeff * x;
        }
    }
    let mut mass = 0.0;
    let mut moment = 0.0;
    for (pid, m) in per_patch.iter().enumerate() {
        mass += m;
        moment += patches[pid].vcg * m;
    }
    (mass, moment)
}

/// Mass (t): fixed part, controllable part `d . x`, and one reinforcement
/// bar per buckled element.
pub fn structural_mass(
    config: &Configuration,
    space: &ParameterSpace,
    patches: &[Patch],
    pen: &PenaltyConfig,
    n_buckled: usize,
) -> f64 {
    let (controllable, _) = patch_mass_terms(config, space, patches);
    pen.m_fixed + controllable + pen.m_bar * n_buckled as f64
}

/// Structural VCG (m): mass-weighted mean of fixed and parameterized parts.
pub fn structural_vcg(
    config: &Configuration,
    space: &ParameterSpace,
    patches: &[Patch],
    pen: &PenaltyConfig,
) -> f64 {
    let (mass, moment) = patch_mass_terms(config, space, patches);
    (pen.vcg_fixed * pen.m_fixed + moment) / (pen.m_fixed + mass)
}

/// Assembles the five QoIs of a high-fidelity snapshot.
#[allow(clippy::too_many_arguments)]
pub fn compute_qois(
    snapshot: &StressSnapshot,
    elements: &[Element],
    patches: &[Patch],
    material: &Material,
    space: &ParameterSpace,
    pen: &PenaltyConfig,
    thickness_mm: &[f64],
    monitored_node: usize,
) -> Result<QoiVector> {
    let failures = evaluate_failures(
        snapshot,
        elements,
        thickness_mm,
        material,
        &pen.yield_thresholds,
    )?;
    let n_y = failures.n_yielded();
    let n_b = failures.n_buckled();
    Ok(QoiVector {
        n_y,
        n_b,
        deflection: vertical_deflection(snapshot, monitored_node)?,
        mass: structural_mass(&snapshot.config, space, patches, pen, n_b),
        vcg: structural_vcg(&snapshot.config, space, patches, pen),
    })
}

/// Penalized objective: mass plus quadratic penalties on the failure-count
/// excesses (and optionally on the deflection excess).
pub fn penalized_mass(q: &QoiVector, pen: &PenaltyConfig) -> f64 {
    let y_excess = (q.n_y as f64 - pen.y_crit as f64).max(0.0);
    let b_excess = (q.n_b as f64 - pen.b_crit as f64).max(0.0);
    let mut f = q.mass + pen.c_y * y_excess * y_excess + pen.c_b * b_excess * b_excess;
    if let Some(crit) = pen.deflection_crit {
        let d_excess = (q.deflection - crit).max(0.0);
        f += pen.c_deflection * d_excess * d_excess;
    }
    f
}

/// Percentage gap of the controllable mass (plus penalties) from the
/// theoretical lower bound `d . x_lb`.
pub fn mass_gap(
    x: &Configuration,
    q: &QoiVector,
    pen: &PenaltyConfig,
    space: &ParameterSpace,
    x_lb: &Configuration,
) -> Result<f64> {
    let d_dot = |c: &Configuration| -> f64 {
        space
            .params
            .iter()
            .zip(&c.values)
            .map(|(p, v)| p.linear_density * v)
            .sum()
    };
    let lb = d_dot(x_lb);
    if lb == 0.0 {
        return Err(Error::Domain("mass lower bound d . x_lb is zero".into()));
    }
    let f_pen = penalized_mass(q, pen) - q.mass;
    Ok(100.0 * (d_dot(x) - lb + pen.m_bar * q.n_b as f64 + f_pen) / lb)
}

impl PenaltyConfig {
    /// Loose defaults for synthetic tests; the demo pipeline ships its own
    /// calibrated values.
    pub fn example() -> Self {
        Self {
            c_y: 1.0,
            c_b: 1.0,
            y_crit: 100,
            b_crit: 200,
            m_bar: 0.05,
            m_fixed: 150.0,
            vcg_fixed: 7.0,
            vcg_crit: 8.0,
            deflection_crit: None,
            c_deflection: 1.0,
            yield_thresholds: YieldThresholds::default(),
        }
    }
}
