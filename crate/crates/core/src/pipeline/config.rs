use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criteria::{PenaltyConfig, YieldThresholds};
use crate::error::Result;
use crate::rom::GprConfig;
use crate::sbo::AcquisitionKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Initial design size including the default configuration.
    pub initial_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MooPhaseConfig {
    pub pop_size: usize,
    pub generations: usize,
    /// Samples promoted to high fidelity per round.
    pub infill_count: usize,
    pub max_rounds: usize,
    /// Round convergence: stop when the first pick's criterion value drops
    /// below this.
    pub delta_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoPhaseConfig {
    pub max_iters: usize,
    pub time_limit_secs: Option<f64>,
    pub validation_count: usize,
    pub max_rounds: usize,
    pub switch_patience: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub n_starts: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdsPhaseConfig {
    pub max_sweeps: usize,
    pub time_limit_secs: Option<f64>,
    pub max_rounds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReparamConfig {
    /// Target parameter counts of the successive refinement rounds.
    pub schedule: Vec<usize>,
    /// Cluster counts proposed per section run from 2 to this.
    pub max_clusters: usize,
    /// Fresh uniform samples drawn from each refined domain.
    pub resample_count: usize,
    /// Candidate sets scored by the max-min-distance rule.
    pub resample_trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub max_hf_evals: usize,
    /// A reparameterization round must improve the incumbent by this
    /// fraction of `d . x_lb`, or the schedule stops early.
    pub improvement_tol_frac: f64,
}

/// Full configuration of one optimization run, read from `pipeline.toml` in
/// the run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Model spec file, relative to the run directory.
    pub model_spec: PathBuf,
    pub seed: u64,
    /// POD truncation: discard modes with normalized singular value below
    /// this at the first fit; later stages add one rank per new parameter.
    pub rank_tau: f64,
    pub penalty: PenaltyConfig,
    pub sampling: SamplingConfig,
    pub moo: MooPhaseConfig,
    pub bo: BoPhaseConfig,
    pub pds: PdsPhaseConfig,
    pub reparam: ReparamConfig,
    pub stopping: StoppingConfig,
    pub gpr: GprConfig,
}

impl PipelineConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: PipelineConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("pipeline config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.sampling.initial_count == 0 {
            return Err(crate::Error::Config(
                "initial sample count must be >= 1".into(),
            ));
        }
        if self.moo.pop_size < 2 {
            return Err(crate::Error::Config("population size must be >= 2".into()));
        }
        if !self.reparam.schedule.windows(2).all(|w| w[0] < w[1]) {
            return Err(crate::Error::Config(
                "reparameterization schedule must be strictly increasing".into(),
            ));
        }
        if self.rank_tau <= 0.0 || self.rank_tau >= 1.0 {
            return Err(crate::Error::Config("rank_tau must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Reference defaults: full-scale optimizer settings with the
    /// calibrated demo penalty constants.
    pub fn default_for_demo() -> Self {
        PipelineConfig {
            model_spec: PathBuf::from("model.toml"),
            seed: 0,
            rank_tau: 0.01,
            penalty: PenaltyConfig {
                c_y: 5.0,
                c_b: 5.0,
                y_crit: 200,
                b_crit: 200,
                m_bar: 0.05,
                m_fixed: 150.0,
                vcg_fixed: 7.0,
                vcg_crit: 6.90,
                deflection_crit: None,
                c_deflection: 1.0,
                yield_thresholds: YieldThresholds::default(),
            },
            sampling: SamplingConfig { initial_count: 21 },
            moo: MooPhaseConfig {
                pop_size: 2000,
                generations: 10,
                infill_count: 9,
                max_rounds: 3,
                delta_tol: 0.02,
            },
            bo: BoPhaseConfig {
                max_iters: 200,
                time_limit_secs: Some(300.0),
                validation_count: 3,
                max_rounds: 3,
                switch_patience: 100,
                beta: 2.0,
                epsilon: 0.1,
                n_starts: 12,
            },
            pds: PdsPhaseConfig {
                max_sweeps: 20,
                time_limit_secs: Some(300.0),
                max_rounds: 2,
            },
            reparam: ReparamConfig {
                schedule: vec![10],
                max_clusters: 2,
                resample_count: 20,
                resample_trials: 50,
            },
            stopping: StoppingConfig {
                max_hf_evals: 400,
                improvement_tol_frac: 0.005,
            },
            gpr: GprConfig::default(),
        }
    }

    /// Desk-scale budgets for quick end-to-end runs and the acceptance
    /// suite: same pipeline, smaller optimizer loops.
    pub fn quick_demo() -> Self {
        let mut cfg = Self::default_for_demo();
        cfg.moo = MooPhaseConfig {
            pop_size: 300,
            generations: 6,
            infill_count: 9,
            max_rounds: 2,
            delta_tol: 0.05,
        };
        cfg.bo = BoPhaseConfig {
            max_iters: 40,
            time_limit_secs: Some(60.0),
            validation_count: 3,
            max_rounds: 2,
            switch_patience: 15,
            beta: 2.0,
            epsilon: 0.1,
            n_starts: 8,
        };
        cfg.pds = PdsPhaseConfig {
            max_sweeps: 6,
            time_limit_secs: Some(60.0),
            max_rounds: 3,
        };
        cfg.reparam.resample_trials = 25;
        cfg.gpr = GprConfig {
            restarts: 2,
            max_iters: 60,
            ..GprConfig::default()
        };
        cfg.stopping.max_hf_evals = 250;
        cfg
    }

    pub fn start_acquisition(&self) -> AcquisitionKind {
        AcquisitionKind::Nlcb
    }
}
