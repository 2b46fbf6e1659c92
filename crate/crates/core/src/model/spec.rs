use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Material, RegionTag};
use crate::error::{Error, Result};

/// Longitudinal profile of the end tractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadProfile {
    /// Linear-in-z hull girder bending profile; hogging and sagging are
    /// sign-mirrored.
    Bending,
    /// Uniform axial traction; used by patch tests.
    Uniform,
}

/// One horizontal band of the unfolded panel layout, bottom-up.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelSpec {
    pub region: RegionTag,
    /// Quad rows in this band.
    pub rows: usize,
    /// Height of one row (m); also the stiffener spacing used as the plate
    /// buckling width.
    pub row_height: f64,
    /// Columns per patch; each band splits into `ceil(nx / patch_cols)`
    /// patches per row-group.
    pub patch_cols: usize,
    /// Spec thickness (mm) for a band excluded from the parameterization.
    #[serde(default)]
    pub fixed: Option<f64>,
}

/// Thickness domain of one region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionSpec {
    pub default: f64,
    /// Admissible thickness values (mm), strictly ascending.
    pub domain: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    /// Ship length (m).
    pub length: f64,
    /// Quad columns along the length.
    pub nx: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadSpec {
    pub profile: LoadProfile,
    /// Extreme-fiber bending stress (MPa) under the reference (default)
    /// thickness profile; sets the fixed end forces.
    pub bending_stress: f64,
    /// Lateral pressure (Pa), mapped to consistent vertical nodal loads;
    /// identical in both load cases.
    pub pressure: f64,
    /// Node whose vertical displacement is the deflection QoI; `None` picks
    /// the top mid-span node.
    #[serde(default)]
    pub monitored_node: Option<usize>,
}

/// Input description of the demo model, read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub grid: GridSpec,
    #[serde(default)]
    pub material: Material,
    pub panels: Vec<PanelSpec>,
    pub regions: BTreeMap<RegionTag, RegionSpec>,
    pub loads: LoadSpec,
}

impl ModelSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ModelSpec = toml::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.nx == 0 || self.grid.length <= 0.0 {
            return Err(Error::Config(
                "grid must have nx >= 1 and positive length".into(),
            ));
        }
        if self.panels.is_empty() {
            return Err(Error::Config("at least one panel band is required".into()));
        }
        for p in &self.panels {
            if p.rows == 0 || p.row_height <= 0.0 || p.patch_cols == 0 {
                return Err(Error::Config(format!(
                    "panel {} must have positive rows, row_height and patch_cols",
                    p.region.name()
                )));
            }
            if p.fixed.is_none() && !self.regions.contains_key(&p.region) {
                return Err(Error::Config(format!(
                    "region {} has parameterized panels but no domain",
                    p.region.name()
                )));
            }
        }
        for (tag, r) in &self.regions {
            if r.domain.is_empty() {
                return Err(Error::Config(format!(
                    "region {} has an empty domain",
                    tag.name()
                )));
            }
            if !r.domain.windows(2).all(|w| w[0] < w[1]) || r.domain[0] <= 0.0 {
                return Err(Error::Config(format!(
                    "region {} domain must be positive and strictly ascending",
                    tag.name()
                )));
            }
            if !r.domain.iter().any(|d| d.to_bits() == r.default.to_bits()) {
                return Err(Error::Config(format!(
                    "region {} default {} is not in its domain",
                    tag.name(),
                    r.default
                )));
            }
        }
        if self.material.youngs_modulus <= 0.0
            || !(0.0..0.5).contains(&self.material.poisson)
            || self.material.density <= 0.0
        {
            return Err(Error::Config("material constants out of range".into()));
        }
        Ok(())
    }

    /// The five-region demo hull: ~2,000 elements, 5 parameters, 62,720
    /// configurations.
    pub fn demo() -> Self {
        let mut regions = BTreeMap::new();
        regions.insert(
            RegionTag::Bottom,
            RegionSpec {
                default: 14.0,
                domain: vec![
                    12.0, 12.5, 13.0, 13.5, 14.0, 14.5, 15.0, 15.5, 16.0, 16.5, 17.0, 18.0, 19.0,
                    20.0,
                ],
            },
        );
        regions.insert(
            RegionTag::InnerBottom,
            RegionSpec {
                default: 8.0,
                domain: vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 12.0, 15.0],
            },
        );
        regions.insert(
            RegionTag::Shell,
            RegionSpec {
                default: 9.0,
                domain: vec![8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0],
            },
        );
        regions.insert(
            RegionTag::Bulkhead,
            RegionSpec {
                default: 10.0,
                domain: vec![
                    8.0, 8.5, 9.0, 9.5, 10.0, 10.5, 11.0, 11.5, 12.0, 12.5, 13.0, 13.5, 14.0, 15.0,
                ],
            },
        );
        regions.insert(
            RegionTag::Deck,
            RegionSpec {
                default: 7.5,
                domain: vec![5.0, 7.5, 10.0, 12.5, 15.0],
            },
        );
        ModelSpec {
            grid: GridSpec {
                length: 60.0,
                nx: 100,
            },
            material: Material::default(),
            regions,
            panels: vec![
                PanelSpec {
                    region: RegionTag::Bottom,
                    rows: 2,
                    row_height: 0.7,
                    patch_cols: 5,
                    fixed: None,
                },
                PanelSpec {
                    region: RegionTag::InnerBottom,
                    rows: 2,
                    row_height: 0.7,
                    patch_cols: 5,
                    fixed: None,
                },
                PanelSpec {
                    region: RegionTag::Shell,
                    rows: 3,
                    row_height: 0.7,
                    patch_cols: 5,
                    fixed: None,
                },
                PanelSpec {
                    region: RegionTag::Bulkhead,
                    rows: 6,
                    row_height: 0.7,
                    patch_cols: 5,
                    fixed: None,
                },
                PanelSpec {
                    region: RegionTag::Deck,
                    rows: 7,
                    row_height: 0.7,
                    patch_cols: 5,
                    fixed: None,
                },
            ],
            loads: LoadSpec {
                profile: LoadProfile::Bending,
                bending_stress: 170.0,
                pressure: 15_000.0,
                monitored_node: None,
            },
        }
    }
}
