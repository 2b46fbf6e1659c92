use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::criteria::QoiVector;
use crate::error::{Error, Result};
use crate::model::{Configuration, ParameterSpace, StressComponent, StressSnapshot};

/// Where a high-fidelity evaluation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    InitialSample,
    MooInfill,
    Bo,
    Pds,
    ReparamSample,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::InitialSample => "initial-sample",
            Phase::MooInfill => "moo-infill",
            Phase::Bo => "bo",
            Phase::Pds => "pds",
            Phase::ReparamSample => "reparam-sample",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DbEntry {
    pub config: Configuration,
    pub snapshot: StressSnapshot,
    pub qois: QoiVector,
    pub phase: Phase,
    /// Canonical per-patch thickness hash; stable across lifts.
    pub physical_key: u64,
}

/// The high-fidelity evaluation database. Configurations are unique; entries
/// are lifted in place when the parameter space is refined.
#[derive(Debug, Clone, Default)]
pub struct SnapshotDatabase {
    entries: Vec<DbEntry>,
}

impl SnapshotDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DbEntry] {
        &self.entries
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        let key = config.key();
        self.entries.iter().any(|e| e.config.key() == key)
    }

    pub fn get(&self, config: &Configuration) -> Option<&DbEntry> {
        let key = config.key();
        self.entries.iter().find(|e| e.config.key() == key)
    }

    pub fn get_by_physical_key(&self, key: u64) -> Option<&DbEntry> {
        self.entries.iter().find(|e| e.physical_key == key)
    }

    pub fn insert(&mut self, entry: DbEntry) -> Result<()> {
        if self.contains(&entry.config) {
            return Err(Error::Data(format!(
                "duplicate configuration {:?} in snapshot database",
                entry.config.values
            )));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn configs(&self) -> Vec<Configuration> {
        self.entries.iter().map(|e| e.config.clone()).collect()
    }

    /// Snapshot matrix (n_elements x m) of one (load case, component) pair,
    /// entries in database order.
    pub fn component_matrix(&self, case_idx: usize, comp: StressComponent) -> DMatrix<f64> {
        let m = self.entries.len();
        let n = self.entries.first().map_or(0, |e| e.snapshot.n_elements());
        DMatrix::from_fn(n, m, |row, col| {
            self.entries[col].snapshot.cases[case_idx].component(comp)[row]
        })
    }

    /// Signed vertical displacement (mm) of a node, per entry, for one case.
    pub fn deflection_targets(&self, case_idx: usize, node: usize) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.snapshot.cases[case_idx].displacements[node][1] * 1000.0)
            .collect()
    }

    /// Rewrites every entry's configuration into a refined space by lifting.
    pub fn lift_all(&mut self, new_space: &ParameterSpace) {
        for entry in &mut self.entries {
            let lifted = new_space.lift(&entry.config);
            entry.snapshot.config = lifted.clone();
            entry.config = lifted;
        }
    }

    /// Best feasible entry by penalized mass: the incumbent.
    pub fn incumbent(&self, pen: &crate::criteria::PenaltyConfig) -> Option<(&DbEntry, f64)> {
        self.entries
            .iter()
            .filter(|e| e.qois.vcg <= pen.vcg_crit)
            .map(|e| (e, crate::criteria::penalized_mass(&e.qois, pen)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}
