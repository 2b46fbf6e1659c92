use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::run::Cursor;
use crate::criteria::{self, QoiVector};
use crate::error::{Error, Result};
use crate::model::{
    build_demo_model, load_snapshot, save_snapshot, solve_hifi, Configuration, HullModel,
    ModelSpec, ParameterSpace, StressSnapshot,
};
use crate::rom::{
    surrogate_fit, DbEntry, GprConfig, Phase, RankPolicy, SnapshotDatabase, SurrogateModel,
};

pub const RUN_MANIFEST: &str = "hullopt.json";
pub const RUN_SCHEMA: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub created_unix_ms: u64,
}

/// One appended row per high-fidelity evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerRow {
    pub index: usize,
    pub phase: Phase,
    pub stage: usize,
    /// Configuration values at evaluation time (coarse spaces are shorter).
    pub config: Vec<f64>,
    pub physical_key: u64,
    pub qois: QoiVector,
    pub penalized: f64,
    pub timestamp_unix_ms: u64,
}

/// End-of-stage incumbent summary, one per parameterization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub n_params: usize,
    pub hf_evals_total: usize,
    pub incumbent_config: Vec<f64>,
    pub qois: QoiVector,
    pub penalized: f64,
    pub mass_gap_percent: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersistedState {
    schema: u32,
    stage: usize,
    rank: Option<usize>,
    #[serde(default)]
    cursor: Cursor,
    space: ParameterSpace,
    ledger: Vec<LedgerRow>,
    stages: Vec<StageSummary>,
}

/// In-memory state of a run plus its on-disk mirror. Every high-fidelity
/// result is persisted immediately, keyed by the configuration's physical
/// hash, so interrupted runs resume without re-solving.
pub struct RunState {
    pub run_dir: PathBuf,
    pub config: PipelineConfig,
    pub model_spec: ModelSpec,
    pub model: HullModel,
    pub space: ParameterSpace,
    pub db: SnapshotDatabase,
    pub surrogate: Option<SurrogateModel>,
    pub ledger: Vec<LedgerRow>,
    pub stages: Vec<StageSummary>,
    pub stage: usize,
    /// Shared POD rank once the first fit has chosen it.
    pub rank: Option<usize>,
    /// Where the run state machine stands.
    pub cursor: Cursor,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Creates a run directory with the manifest and both config files.
pub fn init_run_dir(run_dir: &Path, model: &ModelSpec, pipeline: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(run_dir)?;
    if run_dir.join(RUN_MANIFEST).exists() {
        return Err(Error::Config(format!(
            "{} already contains a run (found {RUN_MANIFEST})",
            run_dir.display()
        )));
    }
    let manifest = RunManifest {
        schema: RUN_SCHEMA,
        created_unix_ms: now_ms(),
    };
    fs::write(
        run_dir.join(RUN_MANIFEST),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    fs::write(run_dir.join("model.toml"), model.to_toml())?;
    fs::write(run_dir.join("pipeline.toml"), pipeline.to_toml())?;
    fs::create_dir_all(run_dir.join("db"))?;
    fs::create_dir_all(run_dir.join("reports"))?;
    Ok(())
}

/// Validates the run directory manifest before any subcommand acts on it.
pub fn check_run_dir(run_dir: &Path) -> Result<RunManifest> {
    let path = run_dir.join(RUN_MANIFEST);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} is not a run directory (missing {RUN_MANIFEST}); run `init` first",
            run_dir.display()
        )));
    }
    let manifest: RunManifest = serde_json::from_slice(&fs::read(&path)?)?;
    if manifest.schema != RUN_SCHEMA {
        return Err(Error::Config(format!(
            "run directory schema {} unsupported (expected {RUN_SCHEMA})",
            manifest.schema
        )));
    }
    Ok(manifest)
}

impl RunState {
    /// Opens a run directory, replaying any persisted state.
    pub fn open(run_dir: &Path) -> Result<Self> {
        check_run_dir(run_dir)?;
        let config = PipelineConfig::from_path(&run_dir.join("pipeline.toml"))?;
        let model_spec = ModelSpec::from_path(&run_dir.join(&config.model_spec))?;
        let (model, fresh_space) = build_demo_model(&model_spec)?;

        let state_path = run_dir.join("state.json");
        let mut st = RunState {
            run_dir: run_dir.to_path_buf(),
            config,
            model_spec,
            model,
            space: fresh_space,
            db: SnapshotDatabase::new(),
            surrogate: None,
            ledger: Vec::new(),
            stages: Vec::new(),
            stage: 0,
            rank: None,
            cursor: Cursor::Sample,
        };
        if state_path.exists() {
            let persisted: PersistedState = serde_json::from_slice(&fs::read(&state_path)?)?;
            if persisted.schema != RUN_SCHEMA {
                return Err(Error::Config("state schema mismatch".into()));
            }
            st.space = persisted.space;
            st.stage = persisted.stage;
            st.rank = persisted.rank;
            st.cursor = persisted.cursor;
            st.stages = persisted.stages;
            // reload every snapshot referenced by the ledger
            for row in &persisted.ledger {
                let config = Configuration::new(row.config.clone());
                let lifted = st.space.lift(&config);
                if st.db.contains(&lifted) {
                    continue;
                }
                let dir = st.snapshot_dir(row.physical_key);
                let (mut snapshot, _) = load_snapshot(&dir)?;
                snapshot.config = lifted.clone();
                let qois = st.qois_of(&snapshot, &lifted)?;
                st.db.insert(DbEntry {
                    config: lifted,
                    snapshot,
                    qois,
                    phase: row.phase,
                    physical_key: row.physical_key,
                })?;
            }
            st.ledger = persisted.ledger;
        }
        Ok(st)
    }

    fn snapshot_dir(&self, key: u64) -> PathBuf {
        self.run_dir.join("db").join(format!("{key:016x}"))
    }

    pub fn persist(&self) -> Result<()> {
        let persisted = PersistedState {
            schema: RUN_SCHEMA,
            stage: self.stage,
            rank: self.rank,
            cursor: self.cursor,
            space: self.space.clone(),
            ledger: self.ledger.clone(),
            stages: self.stages.clone(),
        };
        let tmp = self.run_dir.join("state.json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&persisted)?)?;
        fs::rename(&tmp, self.run_dir.join("state.json"))?;
        Ok(())
    }

    pub fn qois_of(&self, snapshot: &StressSnapshot, config: &Configuration) -> Result<QoiVector> {
        let thickness = self.model.thickness_map(&self.space, config)?;
        criteria::compute_qois(
            snapshot,
            &self.model.elements,
            &self.model.patches,
            &self.model.material,
            &self.space,
            &self.config.penalty,
            &thickness,
            self.model.monitored_node,
        )
    }

    pub fn hf_evals(&self) -> usize {
        self.ledger.len()
    }

    pub fn budget_left(&self) -> usize {
        self.config
            .stopping
            .max_hf_evals
            .saturating_sub(self.hf_evals())
    }

    /// Best feasible high-fidelity entry (the incumbent) and its penalized
    /// mass.
    pub fn incumbent(&self) -> Option<(&DbEntry, f64)> {
        self.db.incumbent(&self.config.penalty)
    }

    /// High-fidelity solves for every unvisited configuration of the batch,
    /// reusing persisted snapshots via the physical key. Results are
    /// appended to the database and the ledger, and the state file is
    /// rewritten. Truncates at the evaluation budget.
    pub fn validate_hifi(&mut self, configs: &[Configuration], phase: Phase) -> Result<usize> {
        let mut fresh: Vec<Configuration> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for c in configs {
            if !self.db.contains(c) && seen.insert(c.key()) {
                fresh.push(c.clone());
            }
        }
        fresh.truncate(self.budget_left());
        if fresh.is_empty() {
            return Ok(0);
        }

        // cached snapshots load sequentially; missing ones solve in parallel
        let mut work: Vec<(Configuration, u64, Option<StressSnapshot>)> = fresh
            .iter()
            .map(|c| {
                let key = self.model.physical_key(&self.space, c);
                let dir = self.snapshot_dir(key);
                let cached = if dir.join("manifest.json").exists() {
                    load_snapshot(&dir).ok().map(|(mut s, _)| {
                        s.config = c.clone();
                        s
                    })
                } else {
                    None
                };
                (c.clone(), key, cached)
            })
            .collect();
        let solved: Vec<(usize, Result<StressSnapshot>)> = work
            .par_iter()
            .enumerate()
            .filter(|(_, (_, _, cached))| cached.is_none())
            .map(|(i, (config, _, _))| (i, solve_hifi(&self.model, &self.space, config)))
            .collect();
        for (i, result) in solved {
            match result {
                Ok(snapshot) => work[i].2 = Some(snapshot),
                Err(e) => {
                    // solver errors are recorded and the run continues
                    eprintln!("warning: high-fidelity solve failed: {e}");
                }
            }
        }

        let mut added = 0;
        for (config, key, snapshot) in work {
            let Some(snapshot) = snapshot else { continue };
            let dir = self.snapshot_dir(key);
            if !dir.join("manifest.json").exists() {
                save_snapshot(&dir, &snapshot, self.space.version)?;
            }
            let qois = self.qois_of(&snapshot, &config)?;
            let penalized = criteria::penalized_mass(&qois, &self.config.penalty);
            self.ledger.push(LedgerRow {
                index: self.ledger.len(),
                phase,
                stage: self.stage,
                config: config.values.clone(),
                physical_key: key,
                qois,
                penalized,
                timestamp_unix_ms: now_ms(),
            });
            self.db.insert(DbEntry {
                config,
                snapshot,
                qois,
                phase,
                physical_key: key,
            })?;
            added += 1;
        }
        self.persist()?;
        Ok(added)
    }

    /// Refits the surrogates on the current database. The first fit selects
    /// the shared rank by the energy policy; later fits keep the recorded
    /// rank (bumped by reparameterizations), clamped to the database size.
    pub fn fit_surrogate(&mut self) -> Result<()> {
        let policy = match self.rank {
            None => RankPolicy::Energy(self.config.rank_tau),
            Some(r) => RankPolicy::Fixed(r.min(self.db.len())),
        };
        // deterministic seeds tied to the database content, so interrupted
        // runs refit identically on resume
        let gpr = GprConfig {
            seed: self.config.seed ^ (self.db.len() as u64) << 8,
            ..self.config.gpr
        };
        let surrogate = surrogate_fit(&self.db, &self.model, &self.space, &policy, &gpr)?;
        if self.rank.is_none() {
            self.rank = Some(surrogate.rank);
        }
        self.surrogate = Some(surrogate);
        Ok(())
    }
}
