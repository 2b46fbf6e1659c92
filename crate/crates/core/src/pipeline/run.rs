use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::report;
use super::state::{RunState, StageSummary};
use crate::criteria;
use crate::error::{Error, Result};
use crate::model::Configuration;
use crate::moo::{evolve, infill_select, MooSettings};
use crate::reparam;
use crate::rom::Phase;
use crate::sbo::{
    bo_run, pds_run, AcquisitionConfig, BoSettings, LinearConstraints, Objective, PdsSettings,
    SurrogateObjective,
};
use crate::util::rng::{fnv1a64, stream};

/// Where the run state machine stands; persisted so an interrupted run
/// resumes at the exact round boundary it left off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Cursor {
    #[default]
    Sample,
    Moo {
        round: usize,
    },
    Bo {
        round: usize,
    },
    Pds {
        round: usize,
    },
    StageEnd,
    Reparam,
    Done,
}

/// Uniform i.i.d. sample of the discrete domain, deduplicated, with the
/// default configuration always included. `count` is the total size.
pub fn initial_sample(
    space: &crate::model::ParameterSpace,
    count: usize,
    seed: u64,
) -> Vec<Configuration> {
    let mut rng = stream(seed, "initial-sample", &[space.version as u64]);
    let mut out = vec![space.default_config()];
    let mut keys: std::collections::BTreeSet<Vec<u64>> = out.iter().map(|c| c.key()).collect();
    let mut attempts = 0;
    while out.len() < count && attempts < count * 1000 {
        attempts += 1;
        let values: Vec<f64> = space
            .params
            .iter()
            .map(|p| p.domain[rng.random_range(0..p.domain.len())])
            .collect();
        let c = Configuration::new(values);
        if keys.insert(c.key()) {
            out.push(c);
        }
    }
    out
}

fn phase_seed(st: &RunState, phase: &str, round: usize) -> u64 {
    st.config.seed ^ fnv1a64(phase.as_bytes()) ^ ((st.stage as u64) << 32) ^ ((round as u64) << 16)
}

/// One multi-objective round: GA over the surrogate, covariance infill pick,
/// high-fidelity validation, refit. Returns the next cursor.
fn moo_round(st: &mut RunState, round: usize) -> Result<Cursor> {
    let cfg = st.config.moo.clone();
    if round >= cfg.max_rounds || st.budget_left() == 0 {
        return Ok(Cursor::Bo { round: 0 });
    }
    let surrogate = st.surrogate.as_ref().expect("surrogate fitted");
    let settings = MooSettings {
        pop_size: cfg.pop_size,
        generations: cfg.generations,
        seed: phase_seed(st, "moo", round),
        track_hypervolume: false,
    };
    let report_ga = evolve(
        surrogate,
        &st.model,
        &st.space,
        &st.config.penalty,
        &settings,
    )?;
    let population = report_ga.population;
    report::write_pareto_front(st, &population)?;

    let front = population.pareto_front();
    let candidates: Vec<Configuration> = front
        .iter()
        .map(|&i| population.individuals[i].clone())
        .filter(|c| !st.db.contains(c))
        .collect();
    if candidates.is_empty() {
        return Ok(Cursor::Bo { round: 0 });
    }
    let count = cfg
        .infill_count
        .min(candidates.len())
        .min(st.budget_left())
        .max(1);
    let selection = infill_select(&candidates, &st.db.configs(), surrogate, &st.space, count)?;
    st.validate_hifi(&selection.configs, Phase::MooInfill)?;
    st.fit_surrogate()?;

    let delta0 = selection.deltas.first().copied().unwrap_or(0.0);
    if delta0 < cfg.delta_tol {
        Ok(Cursor::Bo { round: 0 })
    } else {
        Ok(Cursor::Moo { round: round + 1 })
    }
}

/// One Bayesian-optimization round: run the specialized BO on the surrogate
/// objective, validate the top candidates, refit, and continue only on
/// high-fidelity improvement.
fn bo_round(st: &mut RunState, round: usize) -> Result<Cursor> {
    let cfg = st.config.bo.clone();
    if round >= cfg.max_rounds || st.budget_left() == 0 {
        return Ok(Cursor::Pds { round: 0 });
    }
    if st.incumbent().is_none() {
        return Err(Error::Infeasible(
            "no VCG-feasible high-fidelity incumbent".into(),
        ));
    }

    let surrogate = st.surrogate.as_ref().expect("surrogate fitted");
    let objective = SurrogateObjective {
        surrogate,
        model: &st.model,
        space: &st.space,
        pen: &st.config.penalty,
    };
    let constraints = LinearConstraints::from_problem(&st.space, &st.config.penalty);
    // BO seeds: every database configuration with its surrogate objective
    let db_configs = st.db.configs();
    let seed_values =
        surrogate.predict_penalized(&st.model, &st.space, &st.config.penalty, &db_configs)?;
    let seeds: Vec<(Configuration, f64)> = db_configs.into_iter().zip(seed_values).collect();

    let settings = BoSettings {
        max_iters: cfg.max_iters,
        time_limit_secs: cfg.time_limit_secs,
        acquisition: AcquisitionConfig {
            beta: cfg.beta,
            epsilon: cfg.epsilon,
            switch_patience: cfg.switch_patience,
        },
        start_kind: st.config.start_acquisition(),
        n_starts: cfg.n_starts,
        validation_count: cfg.validation_count,
        hyper_refresh: 25,
        max_perturbations: 50,
        seed: phase_seed(st, "bo", round),
        gpr: st.config.gpr,
    };
    let outcome = bo_run(&objective, &st.space, &constraints, &seeds, &settings)?;
    report::write_bo_trace(st, round, &outcome.trace)?;
    if outcome.candidates.is_empty() {
        return Ok(Cursor::Pds { round: 0 });
    }
    let configs: Vec<Configuration> = outcome.candidates.iter().map(|(c, _)| c.clone()).collect();
    let added = st.validate_hifi(&configs, Phase::Bo)?;
    if added == 0 {
        return Ok(Cursor::Pds { round: 0 });
    }
    st.fit_surrogate()?;
    // the search is repeated after every validation; only an empty search
    // (or the round cap) concludes the phase, disproved candidates included
    Ok(Cursor::Bo { round: round + 1 })
}

/// One principal-dimensions-search round around the incumbent.
fn pds_round(st: &mut RunState, round: usize) -> Result<Cursor> {
    let cfg = st.config.pds.clone();
    if round >= cfg.max_rounds || st.budget_left() == 0 {
        return Ok(Cursor::StageEnd);
    }
    let (entry, _) = st
        .incumbent()
        .ok_or_else(|| Error::Infeasible("no VCG-feasible high-fidelity incumbent".into()))?;
    let start = entry.config.clone();

    let surrogate = st.surrogate.as_ref().expect("surrogate fitted");
    let objective = SurrogateObjective {
        surrogate,
        model: &st.model,
        space: &st.space,
        pen: &st.config.penalty,
    };
    let constraints = LinearConstraints::from_problem(&st.space, &st.config.penalty);
    let start_f = objective.eval(&start)?;
    let outcome = pds_run(
        &objective,
        &st.space,
        &constraints,
        start.clone(),
        start_f,
        &PdsSettings {
            max_sweeps: cfg.max_sweeps,
            time_limit_secs: cfg.time_limit_secs,
        },
    )?;
    let batch: Vec<Configuration> = outcome.improvers.iter().map(|(c, _)| c.clone()).collect();
    if batch.is_empty() {
        return Ok(Cursor::StageEnd);
    }
    let added = st.validate_hifi(&batch, Phase::Pds)?;
    if added == 0 {
        return Ok(Cursor::StageEnd);
    }
    st.fit_surrogate()?;
    Ok(Cursor::Pds { round: round + 1 })
}

/// End of stage: record the incumbent summary and decide whether a
/// reparameterization follows.
fn stage_end(st: &mut RunState) -> Result<Cursor> {
    let (entry, f) = st
        .incumbent()
        .ok_or_else(|| Error::Infeasible("no VCG-feasible high-fidelity incumbent".into()))?;
    let x_lb = st.space.lower_bound_config();
    let gap = criteria::mass_gap(
        &entry.config,
        &entry.qois,
        &st.config.penalty,
        &st.space,
        &x_lb,
    )?;
    let summary = StageSummary {
        stage: st.stage,
        n_params: st.space.n_params(),
        hf_evals_total: st.hf_evals(),
        incumbent_config: entry.config.values.clone(),
        qois: entry.qois,
        penalized: f,
        mass_gap_percent: gap,
    };
    if st.stages.len() > st.stage {
        st.stages[st.stage] = summary;
    } else {
        st.stages.push(summary);
    }

    let next_target = st.config.reparam.schedule.get(st.stage).copied();
    let Some(target) = next_target else {
        return Ok(Cursor::Done);
    };
    if target <= st.space.n_params() || st.budget_left() == 0 {
        return Ok(Cursor::Done);
    }
    if st.stage > 0 {
        let prev = st.stages[st.stage - 1].penalized;
        let cur = st.stages[st.stage].penalized;
        let d_lb: f64 = st
            .space
            .params
            .iter()
            .map(|p| p.linear_density * p.domain[0])
            .sum();
        if prev - cur < st.config.stopping.improvement_tol_frac * d_lb {
            return Ok(Cursor::Done); // diminishing returns
        }
    }
    Ok(Cursor::Reparam)
}

/// Reparameterization: collect responses, propose clusterings, knapsack the
/// refinements, apply the splits, resample the enlarged domain, validate and
/// refit with the bumped rank.
fn reparam_phase(st: &mut RunState) -> Result<Cursor> {
    let target = st.config.reparam.schedule[st.stage];
    let (entry, _) = st
        .incumbent()
        .ok_or_else(|| Error::Infeasible("no VCG-feasible high-fidelity incumbent".into()))?;
    let incumbent = entry.config.clone();

    let surrogate = st.surrogate.as_ref().expect("surrogate fitted");
    let proposals = reparam::propose_all(
        surrogate,
        &st.db,
        &st.model,
        &st.space,
        &st.config.penalty,
        &incumbent,
        st.config.reparam.max_clusters,
    )?;
    let chosen = reparam::select_refinements(&proposals, st.space.n_params(), target)?;
    if chosen.iter().all(|c| c.is_none()) {
        st.stage += 1;
        return Ok(Cursor::Done);
    }

    let (new_space, joined) =
        reparam::apply_refinements(&st.space, &st.model.patches, &incumbent, &chosen)?;
    let added_params = new_space.n_params() - st.space.n_params();
    report::write_refinement_report(st, &proposals, &chosen, &new_space, &joined)?;

    st.space = new_space;
    st.db.lift_all(&st.space);

    // fresh samples from the enlarged domain, plus the joined ILP optimum
    let mut batch = vec![joined];
    batch.extend(reparam::resample_domain(
        &st.space,
        &st.db.configs(),
        st.config.reparam.resample_count,
        st.config.reparam.resample_trials,
        phase_seed(st, "reparam-resample", 0),
    ));
    st.validate_hifi(&batch, Phase::ReparamSample)?;

    st.rank = Some(st.rank.unwrap_or(0) + added_params);
    st.fit_surrogate()?;
    st.stage += 1;
    Ok(Cursor::Moo { round: 0 })
}

fn log_line(st: &RunState, message: &str) {
    use std::io::Write;
    if let Ok(mut f) = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(st.run_dir.join("run.log"))
    {
        let _ = writeln!(
            f,
            "stage {} | {:?} | hf {} | {}",
            st.stage,
            st.cursor,
            st.hf_evals(),
            message
        );
    }
}

/// Advances the persisted state machine by one step.
pub fn step(st: &mut RunState) -> Result<bool> {
    let next = match st.cursor {
        Cursor::Sample => {
            let has_samples = st
                .ledger
                .iter()
                .any(|row| row.phase == Phase::InitialSample);
            if !has_samples {
                let samples =
                    initial_sample(&st.space, st.config.sampling.initial_count, st.config.seed);
                st.validate_hifi(&samples, Phase::InitialSample)?;
            }
            st.fit_surrogate()?;
            Cursor::Moo { round: 0 }
        }
        Cursor::Moo { round } => {
            ensure_surrogate(st)?;
            moo_round(st, round)?
        }
        Cursor::Bo { round } => {
            ensure_surrogate(st)?;
            bo_round(st, round)?
        }
        Cursor::Pds { round } => {
            ensure_surrogate(st)?;
            pds_round(st, round)?
        }
        Cursor::StageEnd => stage_end(st)?,
        Cursor::Reparam => {
            ensure_surrogate(st)?;
            reparam_phase(st)?
        }
        Cursor::Done => return Ok(false),
    };
    log_line(st, &format!("-> {next:?}"));
    st.cursor = next;
    st.persist()?;
    Ok(st.cursor != Cursor::Done)
}

pub(crate) fn ensure_surrogate(st: &mut RunState) -> Result<()> {
    if st.surrogate.is_none() {
        if st.db.len() < 2 {
            return Err(Error::Data(
                "run has no high-fidelity samples yet; run the sampling phase first".into(),
            ));
        }
        st.fit_surrogate()?;
    }
    Ok(())
}

/// Executes the full pipeline from wherever the run directory stands, then
/// writes the reports.
pub fn run(run_dir: &std::path::Path) -> Result<Vec<StageSummary>> {
    let mut st = RunState::open(run_dir)?;
    while step(&mut st)? {}
    if let Some(surrogate) = &st.surrogate {
        surrogate.save(&st.run_dir.join("surrogates/current"))?;
    }
    report::write_reports(&st)?;
    Ok(st.stages.clone())
}

/// Drives the state machine while it stays inside the given phase family;
/// used by the per-stage CLI subcommands so that the scripted sequence is
/// equivalent to `run`.
pub fn drive_phase(st: &mut RunState, family: PhaseFamily) -> Result<()> {
    loop {
        let inside = matches!(
            (family, st.cursor),
            (PhaseFamily::Sample, Cursor::Sample)
                | (PhaseFamily::Moo, Cursor::Moo { .. })
                | (PhaseFamily::Bo, Cursor::Bo { .. })
                | (PhaseFamily::Pds, Cursor::Pds { .. })
                | (PhaseFamily::Reparam, Cursor::StageEnd | Cursor::Reparam)
        );
        if !inside {
            return Ok(());
        }
        if !step(st)? {
            return Ok(());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseFamily {
    Sample,
    Moo,
    Bo,
    Pds,
    Reparam,
}
