//! Parameterized hull model and the synthetic high-fidelity solver: a
//! plane-stress quadrilateral FEM over an unfolded panel layout, loaded by
//! two sign-mirrored bending cases plus a lateral pressure.

mod mesh;
mod snapshot;
mod solve;
mod spec;

pub use snapshot::{load_snapshot, save_snapshot};
pub use spec::{LoadProfile, ModelSpec, PanelSpec, RegionSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural role of an element; the initial parameterization assigns one
/// parameter per region present in the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionTag {
    Bottom,
    InnerBottom,
    Shell,
    Bulkhead,
    Deck,
}

impl RegionTag {
    pub fn name(&self) -> &'static str {
        match self {
            RegionTag::Bottom => "Bottom",
            RegionTag::InnerBottom => "InnerBottom",
            RegionTag::Shell => "Shell",
            RegionTag::Bulkhead => "Bulkhead",
            RegionTag::Deck => "Deck",
        }
    }
}

/// One quadrilateral shell element of the unfolded panel mesh.
#[derive(Debug, Clone)]
pub struct Element {
    pub id: usize,
    pub patch_id: usize,
    /// Vertical position of the centroid in the real section (m).
    pub centroid_z: f64,
    /// Face area (m²).
    pub area: f64,
    /// Stiffener spacing of the supporting panel (m); buckling width.
    pub panel_width_b: f64,
    /// Panel length between frames (m).
    pub panel_length_a: f64,
    pub region_tag: RegionTag,
}

/// A manufacturable steel sheet: the finest unit a parameter can control.
#[derive(Debug, Clone)]
pub struct Patch {
    pub id: usize,
    pub element_ids: Vec<usize>,
    /// Mass per mm of thickness (t/mm): steel density times total patch area.
    pub linear_density_coeff: f64,
    /// Vertical center of gravity of the patch (m), area-weighted.
    pub vcg: f64,
}

/// One thickness decision variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterDef {
    pub index: usize,
    pub label: String,
    pub patch_ids: Vec<usize>,
    /// Admissible thickness values (mm), strictly ascending.
    pub domain: Vec<f64>,
    /// Parameter this one was split from, if any.
    pub parent: Option<usize>,
    /// Sum of `linear_density_coeff` over the controlled patches (t/mm).
    pub linear_density: f64,
    /// Mass-weighted mean patch VCG (m).
    pub vcg: f64,
    /// Default thickness (mm); the designer's starting value.
    pub default_value: f64,
}

/// The discrete design domain: thickness parameters, their domains, patch
/// assignments and the parent/child hierarchy accumulated by refinements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub params: Vec<ParameterDef>,
    /// Bumped by every refinement application.
    pub version: u32,
}

/// A point of the design domain: one thickness per parameter (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub values: Vec<f64>,
}

impl Configuration {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Bit-pattern key for hashing and deduplication. Values are exact
    /// members of the domain lists, so bit equality is the right notion.
    pub fn key(&self) -> Vec<u64> {
        self.values.iter().map(|v| v.to_bits()).collect()
    }
}

impl ParameterSpace {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Total number of configurations in the product domain, saturating.
    pub fn total_configurations(&self) -> f64 {
        self.params.iter().map(|p| p.domain.len() as f64).product()
    }

    pub fn default_config(&self) -> Configuration {
        Configuration::new(self.params.iter().map(|p| p.default_value).collect())
    }

    /// Per-parameter domain minima: the theoretical mass lower bound point.
    pub fn lower_bound_config(&self) -> Configuration {
        Configuration::new(self.params.iter().map(|p| p.domain[0]).collect())
    }

    pub fn upper_bound_config(&self) -> Configuration {
        Configuration::new(
            self.params
                .iter()
                .map(|p| *p.domain.last().unwrap())
                .collect(),
        )
    }

    /// True when every value is an exact member of its parameter's domain.
    pub fn contains(&self, config: &Configuration) -> bool {
        config.values.len() == self.params.len()
            && config
                .values
                .iter()
                .zip(&self.params)
                .all(|(v, p)| p.domain.iter().any(|d| d.to_bits() == v.to_bits()))
    }

    pub fn check_membership(&self, config: &Configuration) -> Result<()> {
        if self.contains(config) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "configuration {:?} is not a member of the {}-parameter domain",
                config.values,
                self.params.len()
            )))
        }
    }

    /// Min-max normalization of a configuration to the unit cube, using the
    /// parameter domain bounds (not the training data).
    pub fn normalize(&self, config: &Configuration) -> Vec<f64> {
        config
            .values
            .iter()
            .zip(&self.params)
            .map(|(v, p)| {
                let lo = p.domain[0];
                let hi = *p.domain.last().unwrap();
                if hi > lo {
                    (v - lo) / (hi - lo)
                } else {
                    0.5
                }
            })
            .collect()
    }

    /// Lifts a configuration from an ancestor space into this one by copying
    /// each split parameter's value into its children.
    pub fn lift(&self, old: &Configuration) -> Configuration {
        let n_old = old.values.len();
        assert!(
            n_old <= self.params.len(),
            "lift target must be a refinement"
        );
        let mut values = Vec::with_capacity(self.params.len());
        for k in 0..self.params.len() {
            if k < n_old {
                values.push(old.values[k]);
            } else {
                // follow parents until we reach an index the old config covers
                let mut root = k;
                while root >= n_old {
                    root = self.params[root]
                        .parent
                        .expect("parameters beyond the ancestor space must have parents");
                }
                values.push(old.values[root]);
            }
        }
        Configuration::new(values)
    }

    /// Validates domain, partition and hierarchy invariants against the
    /// patch list.
    pub fn validate(&self, patches: &[Patch]) -> Result<()> {
        let mut seen_patch = vec![false; patches.len()];
        for (i, p) in self.params.iter().enumerate() {
            if p.index != i {
                return Err(Error::Data(format!("parameter {i} has index {}", p.index)));
            }
            if p.domain.is_empty() {
                return Err(Error::Config(format!("parameter {i} has an empty domain")));
            }
            if !p.domain.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Config(format!(
                    "parameter {i} domain is not strictly ascending"
                )));
            }
            if p.domain[0] <= 0.0 {
                return Err(Error::Config(format!(
                    "parameter {i} has non-positive values"
                )));
            }
            if p.patch_ids.is_empty() {
                return Err(Error::Data(format!("parameter {i} controls no patches")));
            }
            for &pid in &p.patch_ids {
                if seen_patch[pid] {
                    return Err(Error::Data(format!("patch {pid} under two parameters")));
                }
                seen_patch[pid] = true;
            }
            if let Some(parent) = p.parent {
                if parent >= i {
                    return Err(Error::Data(format!(
                        "parameter {i} has non-ancestor parent {parent}"
                    )));
                }
            }
            let d_sum: f64 = p
                .patch_ids
                .iter()
                .map(|&pid| patches[pid].linear_density_coeff)
                .sum();
            if (d_sum - p.linear_density).abs() > 1e-9 * d_sum.max(1.0) {
                return Err(Error::Data(format!(
                    "parameter {i} linear density {} != patch sum {}",
                    p.linear_density, d_sum
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadKind {
    Hogging,
    Sagging,
}

impl LoadKind {
    pub fn name(&self) -> &'static str {
        match self {
            LoadKind::Hogging => "hogging",
            LoadKind::Sagging => "sagging",
        }
    }
    pub const ALL: [LoadKind; 2] = [LoadKind::Hogging, LoadKind::Sagging];
}

/// One extreme-wave load case: fixed nodal end forces representing the hull
/// girder bending moment, plus a lateral pressure per element.
#[derive(Debug, Clone)]
pub struct LoadCase {
    pub kind: LoadKind,
    /// Nodal forces (N), built once from the reference thickness profile.
    pub boundary_tractions: Vec<(usize, [f64; 2])>,
    /// Per-element lateral pressure (Pa), mapped to consistent nodal loads.
    pub lateral_pressure: Vec<f64>,
}

/// Index of a stress tensor component within a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StressComponent {
    SigmaX,
    SigmaY,
    SigmaZ,
    TauXy,
    TauXz,
    TauYz,
}

impl StressComponent {
    pub const ALL: [StressComponent; 6] = [
        StressComponent::SigmaX,
        StressComponent::SigmaY,
        StressComponent::SigmaZ,
        StressComponent::TauXy,
        StressComponent::TauXz,
        StressComponent::TauYz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StressComponent::SigmaX => "sigma_x",
            StressComponent::SigmaY => "sigma_y",
            StressComponent::SigmaZ => "sigma_z",
            StressComponent::TauXy => "tau_xy",
            StressComponent::TauXz => "tau_xz",
            StressComponent::TauYz => "tau_yz",
        }
    }
}

/// Element stresses and nodal displacements for one load case. Stresses in
/// MPa, displacements in m. The synthetic plane-stress solver leaves the
/// out-of-plane components as exact zeros, but all six are always carried.
#[derive(Debug, Clone)]
pub struct CaseStress {
    pub kind: LoadKind,
    pub sigma_x: Vec<f64>,
    pub sigma_y: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub tau_xy: Vec<f64>,
    pub tau_xz: Vec<f64>,
    pub tau_yz: Vec<f64>,
    pub displacements: Vec<[f64; 2]>,
}

impl CaseStress {
    pub fn zeros(kind: LoadKind, n_elements: usize, n_nodes: usize) -> Self {
        Self {
            kind,
            sigma_x: vec![0.0; n_elements],
            sigma_y: vec![0.0; n_elements],
            sigma_z: vec![0.0; n_elements],
            tau_xy: vec![0.0; n_elements],
            tau_xz: vec![0.0; n_elements],
            tau_yz: vec![0.0; n_elements],
            displacements: vec![[0.0; 2]; n_nodes],
        }
    }

    pub fn component(&self, c: StressComponent) -> &[f64] {
        match c {
            StressComponent::SigmaX => &self.sigma_x,
            StressComponent::SigmaY => &self.sigma_y,
            StressComponent::SigmaZ => &self.sigma_z,
            StressComponent::TauXy => &self.tau_xy,
            StressComponent::TauXz => &self.tau_xz,
            StressComponent::TauYz => &self.tau_yz,
        }
    }

    pub fn component_mut(&mut self, c: StressComponent) -> &mut Vec<f64> {
        match c {
            StressComponent::SigmaX => &mut self.sigma_x,
            StressComponent::SigmaY => &mut self.sigma_y,
            StressComponent::SigmaZ => &mut self.sigma_z,
            StressComponent::TauXy => &mut self.tau_xy,
            StressComponent::TauXz => &mut self.tau_xz,
            StressComponent::TauYz => &mut self.tau_yz,
        }
    }

    /// Full six-component tensor of one element, in the fixed order of
    /// [`StressComponent::ALL`].
    pub fn tensor(&self, element: usize) -> [f64; 6] {
        [
            self.sigma_x[element],
            self.sigma_y[element],
            self.sigma_z[element],
            self.tau_xy[element],
            self.tau_xz[element],
            self.tau_yz[element],
        ]
    }
}

/// Per-load-case averaged element stress tensors and nodal displacements for
/// one configuration: the output of the high-fidelity solver or the fields
/// reconstructed by the surrogate.
#[derive(Debug, Clone)]
pub struct StressSnapshot {
    pub config: Configuration,
    pub cases: Vec<CaseStress>,
}

impl StressSnapshot {
    pub fn n_elements(&self) -> usize {
        self.cases.first().map_or(0, |c| c.sigma_x.len())
    }

    pub fn n_nodes(&self) -> usize {
        self.cases.first().map_or(0, |c| c.displacements.len())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus (MPa).
    pub youngs_modulus: f64,
    /// Poisson ratio.
    pub poisson: f64,
    /// Steel density (t/m³).
    pub density: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            youngs_modulus: 206_000.0,
            poisson: 0.3,
            density: 7.85,
        }
    }
}

/// The assembled synthetic hull: mesh, patches, loads and supports. Immutable
/// after construction; [`solve_hifi`] is reentrant.
#[derive(Debug, Clone)]
pub struct HullModel {
    /// Node coordinates (x, z) in m.
    pub nodes: Vec<[f64; 2]>,
    /// Corner node ids per element, counter-clockwise.
    pub element_nodes: Vec<[usize; 4]>,
    pub elements: Vec<Element>,
    pub patches: Vec<Patch>,
    /// Spec thickness (mm) for elements not controlled by any parameter.
    pub fixed_thickness: Vec<Option<f64>>,
    pub loads: Vec<LoadCase>,
    pub monitored_node: usize,
    pub material: Material,
    /// Zero-valued Dirichlet constraints as (node, dof) with dof 0 = x, 1 = z.
    pub supports: Vec<(usize, usize)>,
}

impl HullModel {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Per-element thickness (mm) under a configuration.
    pub fn thickness_map(
        &self,
        space: &ParameterSpace,
        config: &Configuration,
    ) -> Result<Vec<f64>> {
        space.check_membership(config)?;
        let mut t: Vec<f64> = self
            .fixed_thickness
            .iter()
            .map(|f| f.unwrap_or(0.0))
            .collect();
        for (param, value) in space.params.iter().zip(&config.values) {
            for &pid in &param.patch_ids {
                for &eid in &self.patches[pid].element_ids {
                    t[eid] = *value;
                }
            }
        }
        if t.iter().any(|&v| v <= 0.0) {
            return Err(Error::Data("element with no thickness assignment".into()));
        }
        Ok(t)
    }

    /// Canonical physical key of a configuration: hash of the per-patch
    /// thickness assignment. Lifted configurations map to the same key as
    /// their coarse original, so cached high-fidelity results are reused
    /// across reparameterizations.
    pub fn physical_key(&self, space: &ParameterSpace, config: &Configuration) -> u64 {
        let mut per_patch = vec![0.0f64; self.patches.len()];
        for (param, value) in space.params.iter().zip(&config.values) {
            for &pid in &param.patch_ids {
                per_patch[pid] = *value;
            }
        }
        crate::util::rng::fnv1a64_f64(&per_patch)
    }
}

/// Builds the demo model: mesh, patches, parameter space and load cases.
/// Deterministic for a given model spec.
pub fn build_demo_model(spec: &ModelSpec) -> Result<(HullModel, ParameterSpace)> {
    mesh::build(spec)
}

/// Assembles and solves the plane-stress problem for both load cases and
/// returns element-centroid stresses and nodal displacements. Identical
/// configurations produce bit-identical snapshots.
pub fn solve_hifi(
    model: &HullModel,
    space: &ParameterSpace,
    config: &Configuration,
) -> Result<StressSnapshot> {
    solve::solve(model, space, config)
}

/// Maximum absolute vertical displacement of the monitored node over the load
/// cases, in mm.
pub fn vertical_deflection(snapshot: &StressSnapshot, monitored_node: usize) -> Result<f64> {
    if monitored_node >= snapshot.n_nodes() {
        return Err(Error::Data(format!(
            "monitored node {monitored_node} out of range ({} nodes)",
            snapshot.n_nodes()
        )));
    }
    Ok(snapshot
        .cases
        .iter()
        .map(|c| c.displacements[monitored_node][1].abs())
        .fold(0.0, f64::max)
        * 1000.0)
}
