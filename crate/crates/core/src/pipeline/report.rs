use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::state::RunState;
use crate::criteria::{self, QoiVector};
use crate::error::Result;
use crate::model::{Configuration, LoadKind, ParameterSpace, StressComponent};
use crate::moo::Population;
use crate::reparam::RefinementProposal;
use crate::rom::{cross_validate, GprConfig};
use crate::sbo::BoTraceRow;
use crate::util::io::{fmt_f64, CsvWriter};

fn reports_dir(st: &RunState) -> PathBuf {
    st.run_dir.join("reports")
}

const OBJECTIVE_NAMES: [&str; 5] = ["n_y", "n_b", "deflection_mm", "mass_t", "vcg_m"];

fn config_cell(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(";")
}

/// Surrogate Pareto front of the last genetic round: full rows plus one 2D
/// projection file per objective pair.
pub fn write_pareto_front(st: &RunState, population: &Population) -> Result<()> {
    let dir = reports_dir(st);
    let n_params = st.space.n_params();
    let front = population.pareto_front();

    let mut header: Vec<String> = (0..n_params).map(|i| format!("x{i}")).collect();
    header.extend(OBJECTIVE_NAMES.iter().map(|s| s.to_string()));
    header.push("provenance".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = CsvWriter::create(&dir.join(format!("pf_{n_params}params.csv")), &header_refs)?;
    for &i in &front {
        let c = &population.individuals[i];
        let q = &population.qois[i];
        let mut row: Vec<String> = c.values.iter().map(|v| fmt_f64(*v)).collect();
        for v in q.as_objectives() {
            row.push(fmt_f64(v));
        }
        row.push(if st.db.contains(c) {
            "hifi".into()
        } else {
            "lowfi".into()
        });
        csv.row(row)?;
    }

    // 2D projections per objective pair
    for a in 0..5 {
        for b in (a + 1)..5 {
            let name = format!(
                "pf_{n_params}params_{}_{}.csv",
                OBJECTIVE_NAMES[a], OBJECTIVE_NAMES[b]
            );
            let mut proj = CsvWriter::create(
                &dir.join(name),
                &[OBJECTIVE_NAMES[a], OBJECTIVE_NAMES[b], "provenance"],
            )?;
            for &i in &front {
                let q = population.qois[i].as_objectives();
                let provenance = if st.db.contains(&population.individuals[i]) {
                    "hifi"
                } else {
                    "lowfi"
                };
                proj.row([fmt_f64(q[a]), fmt_f64(q[b]), provenance.to_string()])?;
            }
        }
    }
    Ok(())
}

/// Per-iteration BO trace of one round.
pub fn write_bo_trace(st: &RunState, round: usize, trace: &[BoTraceRow]) -> Result<()> {
    let dir = reports_dir(st);
    let path = dir.join(format!("bo_trace_stage{}_round{round}.csv", st.stage));
    let mut csv = CsvWriter::create(
        &path,
        &[
            "iter",
            "acquisition",
            "config",
            "f_surrogate",
            "incumbent_f",
        ],
    )?;
    for row in trace {
        csv.row([
            row.iter.to_string(),
            row.acquisition.name().to_string(),
            config_cell(&row.config.values),
            fmt_f64(row.f_value),
            fmt_f64(row.incumbent_f),
        ])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RefinementReportJson {
    stage: usize,
    n_params_before: usize,
    n_params_after: usize,
    joined_config: Vec<f64>,
    joined_vcg_feasible: bool,
    sections: Vec<SectionReportJson>,
}

#[derive(Serialize)]
struct SectionReportJson {
    section: usize,
    label: String,
    applied: bool,
    n_clusters: Option<usize>,
    improvement: Option<f64>,
    ilp_objective: Option<f64>,
    /// patch id -> assigned thickness for the applied proposal
    clusters: Vec<(usize, f64)>,
}

/// Refinement outcome: JSON summary plus a CSV cluster map for plotting.
pub fn write_refinement_report(
    st: &RunState,
    proposals: &[Vec<RefinementProposal>],
    chosen: &[Option<RefinementProposal>],
    new_space: &ParameterSpace,
    joined: &Configuration,
) -> Result<()> {
    let dir = reports_dir(st);
    fs::create_dir_all(&dir)?;
    let sections: Vec<SectionReportJson> = chosen
        .iter()
        .enumerate()
        .map(|(section, slot)| {
            let label = st.space.params[section].label.clone();
            match slot {
                None => SectionReportJson {
                    section,
                    label,
                    applied: false,
                    n_clusters: None,
                    improvement: proposals[section]
                        .iter()
                        .map(|p| p.improvement)
                        .fold(None, |acc: Option<f64>, v| {
                            Some(acc.map_or(v, |a| a.max(v)))
                        }),
                    ilp_objective: None,
                    clusters: Vec::new(),
                },
                Some(p) => SectionReportJson {
                    section,
                    label,
                    applied: true,
                    n_clusters: Some(p.n_clusters),
                    improvement: Some(p.improvement),
                    ilp_objective: Some(p.ilp_objective),
                    clusters: st.space.params[section]
                        .patch_ids
                        .iter()
                        .copied()
                        .zip(p.assignment.iter().copied())
                        .collect(),
                },
            }
        })
        .collect();
    let report = RefinementReportJson {
        stage: st.stage,
        n_params_before: st.space.n_params(),
        n_params_after: new_space.n_params(),
        joined_config: joined.values.clone(),
        joined_vcg_feasible: crate::reparam::joined_vcg_feasible(
            new_space,
            &st.model.patches,
            &st.config.penalty,
            joined,
        ),
        sections,
    };
    fs::write(
        dir.join(format!("refinement_stage{}.json", st.stage)),
        serde_json::to_vec_pretty(&report)?,
    )?;

    let mut csv = CsvWriter::create(
        &dir.join(format!("refinement_stage{}_clusters.csv", st.stage)),
        &["section", "label", "patch", "assigned_thickness_mm"],
    )?;
    for s in &report.sections {
        for (patch, t) in &s.clusters {
            csv.row([
                s.section.to_string(),
                s.label.clone(),
                patch.to_string(),
                fmt_f64(*t),
            ])?;
        }
    }
    Ok(())
}

/// High-fidelity evaluation history in ledger order, with the mass gap
/// recomputable from the raw columns.
fn write_hf_history(st: &RunState) -> Result<()> {
    let dir = reports_dir(st);
    let mut csv = CsvWriter::create(
        &dir.join("hf_history.csv"),
        &[
            "index",
            "phase",
            "stage",
            "config",
            "n_y",
            "n_b",
            "deflection_mm",
            "mass_t",
            "vcg_m",
            "penalized_t",
            "m_gap_percent",
            "best_feasible_f",
            "timestamp_unix_ms",
        ],
    )?;
    let pen = &st.config.penalty;
    let mut best = f64::INFINITY;
    for row in &st.ledger {
        // the gap uses the evaluation-time parameterization via the lift
        let lifted = st.space.lift(&Configuration::new(row.config.clone()));
        let x_lb = st.space.lower_bound_config();
        let gap = criteria::mass_gap(&lifted, &row.qois, pen, &st.space, &x_lb)?;
        if row.qois.vcg <= pen.vcg_crit && row.penalized < best {
            best = row.penalized;
        }
        csv.row([
            row.index.to_string(),
            row.phase.as_str().to_string(),
            row.stage.to_string(),
            config_cell(&row.config),
            row.qois.n_y.to_string(),
            row.qois.n_b.to_string(),
            fmt_f64(row.qois.deflection),
            fmt_f64(row.qois.mass),
            fmt_f64(row.qois.vcg),
            fmt_f64(row.penalized),
            fmt_f64(gap),
            fmt_f64(best),
            row.timestamp_unix_ms.to_string(),
        ])?;
    }
    Ok(())
}

/// One row per parameterization stage, mirroring the result-table layout.
fn write_stage_table(st: &RunState) -> Result<()> {
    let dir = reports_dir(st);
    let mut csv = CsvWriter::create(
        &dir.join("incumbent_stages.csv"),
        &[
            "stage",
            "n_params",
            "hf_evals",
            "m_gap_percent",
            "n_y",
            "n_b",
            "deflection_mm",
            "vcg_m",
            "mass_t",
            "penalized_t",
            "config",
        ],
    )?;
    for s in &st.stages {
        csv.row([
            s.stage.to_string(),
            s.n_params.to_string(),
            s.hf_evals_total.to_string(),
            fmt_f64(s.mass_gap_percent),
            s.qois.n_y.to_string(),
            s.qois.n_b.to_string(),
            fmt_f64(s.qois.deflection),
            fmt_f64(s.qois.vcg),
            fmt_f64(s.qois.mass),
            fmt_f64(s.penalized),
            config_cell(&s.incumbent_config),
        ])?;
    }
    Ok(())
}

/// Normalized singular-value decay per (load case, component), flagging any
/// retained mode that violates the truncation policy.
pub fn write_svd_decay(st: &RunState) -> Result<()> {
    let Some(surrogate) = &st.surrogate else {
        return Ok(());
    };
    let dir = reports_dir(st);
    let mut csv = CsvWriter::create(
        &dir.join("svd_decay.csv"),
        &[
            "load_case",
            "component",
            "mode",
            "sigma",
            "normalized",
            "retained",
            "below_tau",
        ],
    )?;
    let tau = st.config.rank_tau;
    for (case_idx, kind) in LoadKind::ALL.iter().enumerate() {
        for comp in StressComponent::ALL {
            let fs = surrogate.field(case_idx, comp);
            let spectrum = fs.basis.normalized_spectrum();
            for (k, (&sigma, &normalized)) in fs
                .basis
                .singular_values
                .iter()
                .zip(spectrum.iter())
                .enumerate()
            {
                let retained = k < fs.basis.rank;
                csv.row([
                    kind.name().to_string(),
                    comp.name().to_string(),
                    k.to_string(),
                    fmt_f64(sigma),
                    fmt_f64(normalized),
                    retained.to_string(),
                    (normalized < tau).to_string(),
                ])?;
            }
        }
    }
    Ok(())
}

/// Five-fold cross-validation error distributions over a rank grid, errors
/// normalized by the critical thresholds.
pub fn write_crossval(
    st: &RunState,
    ranks: &[usize],
    folds: usize,
    gpr: &GprConfig,
) -> Result<PathBuf> {
    let cells = cross_validate(
        &st.db,
        &st.model,
        &st.space,
        &st.config.penalty,
        ranks,
        folds,
        gpr,
    )?;
    let dir = reports_dir(st);
    let path = dir.join("crossval.csv");
    let mut csv = CsvWriter::create(
        &path,
        &["rank", "qoi", "n", "min", "q1", "median", "q3", "max"],
    )?;
    for cell in &cells {
        let s = cell.summary();
        csv.row([
            cell.rank.to_string(),
            cell.qoi.to_string(),
            cell.errors.len().to_string(),
            fmt_f64(s[0]),
            fmt_f64(s[1]),
            fmt_f64(s[2]),
            fmt_f64(s[3]),
            fmt_f64(s[4]),
        ])?;
    }
    Ok(path)
}

/// Self-contained SVG line plot of the best-feasible history; data-first
/// CSVs are always written, the plot is an optional extra.
pub fn write_history_svg(st: &RunState) -> Result<()> {
    let pen = &st.config.penalty;
    let mut best = f64::INFINITY;
    let series: Vec<f64> = st
        .ledger
        .iter()
        .map(|row| {
            if row.qois.vcg <= pen.vcg_crit && row.penalized < best {
                best = row.penalized;
            }
            best
        })
        .collect();
    let finite: Vec<f64> = series.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return Ok(());
    }
    let (w, h, margin) = (640.0, 360.0, 40.0);
    let y_min = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (y_max - y_min).max(1e-9);
    let n = series.len() as f64;
    let mut points = String::new();
    for (i, v) in series.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        let x = margin + (w - 2.0 * margin) * i as f64 / (n - 1.0).max(1.0);
        let y = h - margin - (h - 2.0 * margin) * (v - y_min) / span;
        points.push_str(&format!("{x:.1},{y:.1} "));
    }
    let svg = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="{w}" height="{h}" fill="white"/>
<polyline points="{points}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>
<text x="{tx}" y="16" font-family="sans-serif" font-size="12">best feasible penalized mass vs evaluation</text>
<text x="8" y="{ty}" font-family="sans-serif" font-size="10">min {y_min:.2} t, max {y_max:.2} t</text>
</svg>
"##,
        tx = margin,
        ty = h - 8.0,
    );
    fs::write(reports_dir(st).join("hf_history.svg"), svg)?;
    Ok(())
}

/// Writes the standard report bundle. Re-running on the same state produces
/// bit-identical CSVs.
pub fn write_reports(st: &RunState) -> Result<()> {
    fs::create_dir_all(reports_dir(st))?;
    write_hf_history(st)?;
    write_stage_table(st)?;
    write_svd_decay(st)?;
    Ok(())
}

/// Incumbent-summary convenience for CLI/JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct IncumbentSummary {
    pub config: Vec<f64>,
    pub qois: QoiVector,
    pub penalized: f64,
    pub mass_gap_percent: f64,
    pub hf_evals: usize,
    pub n_params: usize,
}

pub fn incumbent_summary(st: &RunState) -> Result<Option<IncumbentSummary>> {
    let Some((entry, f)) = st.incumbent() else {
        return Ok(None);
    };
    let x_lb = st.space.lower_bound_config();
    let gap = criteria::mass_gap(
        &entry.config,
        &entry.qois,
        &st.config.penalty,
        &st.space,
        &x_lb,
    )?;
    Ok(Some(IncumbentSummary {
        config: entry.config.values.clone(),
        qois: entry.qois,
        penalized: f,
        mass_gap_percent: gap,
        hf_evals: st.hf_evals(),
        n_params: st.space.n_params(),
    }))
}
