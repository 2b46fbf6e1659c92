use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::database::SnapshotDatabase;
use super::gpr::{gpr_fit, GprConfig, GprModel};
use super::pod::{pod_fit, policy_rank, PodBasis, RankPolicy};
use crate::criteria::{self, PenaltyConfig, QoiVector};
use crate::error::{Error, Result};
use crate::model::{
    CaseStress, Configuration, HullModel, LoadKind, ParameterSpace, StressComponent, StressSnapshot,
};
use crate::util::io::{read_f64_raw, write_f64_raw};
use crate::util::rng::fnv1a64;

const PREDICT_CHUNK: usize = 64;

/// POD basis plus the vector-valued GP over its reduced coefficients, for
/// one (load case, stress component) pair.
#[derive(Debug, Clone)]
pub struct FieldSurrogate {
    pub basis: PodBasis,
    pub gpr: GprModel,
}

/// The assembled stress-field surrogate: 12 POD-GPR pairs, two scalar
/// deflection GPs, and the input normalization. Immutable once fitted.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    /// Indexed `case_idx * 6 + component_idx`.
    pub fields: Vec<FieldSurrogate>,
    /// One per load case.
    pub deflection: Vec<GprModel>,
    pub training_configs: Vec<Configuration>,
    /// Shared truncation rank of the non-degenerate components.
    pub rank: usize,
    pub rank_policy: RankPolicy,
    pub space_version: u32,
    pub monitored_node: usize,
}

/// Per-element thickness without domain membership checks; surrogate queries
/// may be continuous points.
fn thickness_unchecked(
    model: &HullModel,
    space: &ParameterSpace,
    config: &Configuration,
) -> Vec<f64> {
    let mut t: Vec<f64> = model
        .fixed_thickness
        .iter()
        .map(|f| f.unwrap_or(0.0))
        .collect();
    for (param, value) in space.params.iter().zip(&config.values) {
        for &pid in &param.patch_ids {
            for &eid in &model.patches[pid].element_ids {
                t[eid] = *value;
            }
        }
    }
    t
}

/// Fits the 12 field surrogates and 2 deflection GPs on the database. The
/// 14 regressions run in parallel; the result shares one truncation rank
/// across the non-degenerate components.
pub fn surrogate_fit(
    db: &SnapshotDatabase,
    model: &HullModel,
    space: &ParameterSpace,
    policy: &RankPolicy,
    gpr_cfg: &GprConfig,
) -> Result<SurrogateModel> {
    let m = db.len();
    if m < 2 {
        return Err(Error::Data(format!(
            "surrogate fit needs at least 2 snapshots, got {m}"
        )));
    }
    let d = space.n_params();
    let norm_rows: Vec<Vec<f64>> = db
        .entries()
        .iter()
        .map(|e| space.normalize(&e.config))
        .collect();
    let x_train = DMatrix::from_fn(m, d, |i, j| norm_rows[i][j]);

    // First pass: full thin SVD per component to get every spectrum, then a
    // shared rank so that all discarded normalized singular values sit below
    // the policy threshold for every component.
    struct PodJob {
        case_idx: usize,
        comp: StressComponent,
        basis: Option<PodBasis>, // None marks an all-zero field
    }
    let mut jobs = Vec::with_capacity(12);
    for (case_idx, _) in LoadKind::ALL.iter().enumerate() {
        for comp in StressComponent::ALL {
            jobs.push((case_idx, comp));
        }
    }
    let pods: Vec<PodJob> = jobs
        .par_iter()
        .map(|&(case_idx, comp)| {
            let matrix = db.component_matrix(case_idx, comp);
            if matrix.iter().all(|&v| v == 0.0) {
                Ok(PodJob {
                    case_idx,
                    comp,
                    basis: None,
                })
            } else {
                let full = pod_fit(&matrix, &RankPolicy::Fixed(usize::MAX))?;
                Ok(PodJob {
                    case_idx,
                    comp,
                    basis: Some(full),
                })
            }
        })
        .collect::<Result<_>>()?;

    let rank = pods
        .iter()
        .filter_map(|j| j.basis.as_ref())
        .map(|b| policy_rank(&b.singular_values, policy))
        .max()
        .unwrap_or(1)
        .min(m);

    let n = model.n_elements();
    let fields: Vec<FieldSurrogate> = pods
        .into_par_iter()
        .map(|job| {
            let seed = gpr_cfg.seed
                ^ fnv1a64(format!("field-{}-{}", job.case_idx, job.comp.name()).as_bytes());
            let cfg = GprConfig { seed, ..*gpr_cfg };
            match job.basis {
                None => {
                    let basis = PodBasis::zero(n);
                    let targets = DMatrix::zeros(m, 1);
                    let gpr = gpr_fit(&x_train, &targets, &cfg).map_err(|e| Error::Fit {
                        load_case: LoadKind::ALL[job.case_idx].name().into(),
                        component: job.comp.name().into(),
                        message: e.to_string(),
                    })?;
                    Ok(FieldSurrogate { basis, gpr })
                }
                Some(mut full) => {
                    full.basis = full.basis.columns(0, rank).into_owned();
                    full.rank = rank;
                    let matrix = db.component_matrix(job.case_idx, job.comp);
                    let coeffs = full.basis.transpose() * matrix; // r x m
                    let targets = coeffs.transpose();
                    let gpr = gpr_fit(&x_train, &targets, &cfg).map_err(|e| Error::Fit {
                        load_case: LoadKind::ALL[job.case_idx].name().into(),
                        component: job.comp.name().into(),
                        message: e.to_string(),
                    })?;
                    Ok(FieldSurrogate { basis: full, gpr })
                }
            }
        })
        .collect::<Result<_>>()?;

    let deflection: Vec<GprModel> = (0..2usize)
        .into_par_iter()
        .map(|case_idx| {
            let seed = gpr_cfg.seed ^ fnv1a64(format!("deflection-{case_idx}").as_bytes());
            let cfg = GprConfig { seed, ..*gpr_cfg };
            let targets =
                DMatrix::from_vec(m, 1, db.deflection_targets(case_idx, model.monitored_node));
            gpr_fit(&x_train, &targets, &cfg).map_err(|e| Error::Fit {
                load_case: LoadKind::ALL[case_idx].name().into(),
                component: "deflection".into(),
                message: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;

    Ok(SurrogateModel {
        fields,
        deflection,
        training_configs: db.configs(),
        rank,
        rank_policy: *policy,
        space_version: space.version,
        monitored_node: model.monitored_node,
    })
}

impl SurrogateModel {
    pub fn field(&self, case_idx: usize, comp: StressComponent) -> &FieldSurrogate {
        let comp_idx = StressComponent::ALL
            .iter()
            .position(|c| *c == comp)
            .unwrap();
        &self.fields[case_idx * 6 + comp_idx]
    }

    /// Reconstructed stress fields for one configuration; displacements are
    /// zero (deflection comes from its own GPs).
    pub fn predict_fields(
        &self,
        space: &ParameterSpace,
        config: &Configuration,
    ) -> Result<StressSnapshot> {
        let row = space.normalize(config);
        let xn = DMatrix::from_fn(1, space.n_params(), |_, j| row[j]);
        let n = self.fields[0].basis.basis.nrows();
        let mut cases = Vec::with_capacity(2);
        for (case_idx, kind) in LoadKind::ALL.iter().enumerate() {
            let mut case = CaseStress::zeros(*kind, n, 0);
            for (comp_idx, comp) in StressComponent::ALL.iter().enumerate() {
                let fs = &self.fields[case_idx * 6 + comp_idx];
                let (mean, _) = fs.gpr.predict(&xn)?;
                let coeffs = DVector::from_fn(fs.basis.rank, |r, _| mean[(0, r)]);
                let recon = fs.basis.reconstruct(&coeffs)?;
                *case.component_mut(*comp) = recon.as_slice().to_vec();
            }
            cases.push(case);
        }
        Ok(StressSnapshot {
            config: config.clone(),
            cases,
        })
    }

    /// Deflection prediction (mm): max over load cases of the absolute
    /// per-case GP means.
    pub fn predict_deflection(
        &self,
        space: &ParameterSpace,
        configs: &[Configuration],
    ) -> Result<Vec<f64>> {
        let q = configs.len();
        let d = space.n_params();
        let rows: Vec<Vec<f64>> = configs.iter().map(|c| space.normalize(c)).collect();
        let xn = DMatrix::from_fn(q, d, |i, j| rows[i][j]);
        let mut out = vec![0.0f64; q];
        for gpr in &self.deflection {
            let (mean, _) = gpr.predict(&xn)?;
            for i in 0..q {
                out[i] = out[i].max(mean[(i, 0)].abs());
            }
        }
        Ok(out)
    }

    /// Batch QoI prediction: reconstruct all six components per load case,
    /// post-process failures, and read the deflection GPs.
    pub fn predict_qois(
        &self,
        model: &HullModel,
        space: &ParameterSpace,
        pen: &PenaltyConfig,
        configs: &[Configuration],
    ) -> Result<Vec<QoiVector>> {
        let mut out = Vec::with_capacity(configs.len());
        for chunk in configs.chunks(PREDICT_CHUNK) {
            out.extend(self.predict_qois_chunk(model, space, pen, chunk)?);
        }
        Ok(out)
    }

    fn predict_qois_chunk(
        &self,
        model: &HullModel,
        space: &ParameterSpace,
        pen: &PenaltyConfig,
        configs: &[Configuration],
    ) -> Result<Vec<QoiVector>> {
        let q = configs.len();
        let d = space.n_params();
        let n = model.n_elements();
        let rows: Vec<Vec<f64>> = configs.iter().map(|c| space.normalize(c)).collect();
        let xn = DMatrix::from_fn(q, d, |i, j| rows[i][j]);

        // n x q reconstruction per (case, component)
        let mut recon: Vec<DMatrix<f64>> = Vec::with_capacity(12);
        for fs in &self.fields {
            if fs.basis.degenerate {
                recon.push(DMatrix::zeros(n, q));
            } else {
                let (mean, _) = fs.gpr.predict(&xn)?; // q x r
                recon.push(&fs.basis.basis * mean.transpose());
            }
        }
        let deflections = self.predict_deflection(space, configs)?;

        let mut out = Vec::with_capacity(q);
        for (i, config) in configs.iter().enumerate() {
            let mut cases = Vec::with_capacity(2);
            for (case_idx, kind) in LoadKind::ALL.iter().enumerate() {
                let mut case = CaseStress::zeros(*kind, n, 0);
                for (comp_idx, comp) in StressComponent::ALL.iter().enumerate() {
                    let col = recon[case_idx * 6 + comp_idx].column(i);
                    *case.component_mut(*comp) = col.as_slice().to_vec();
                }
                cases.push(case);
            }
            let snapshot = StressSnapshot {
                config: config.clone(),
                cases,
            };
            let thickness = thickness_unchecked(model, space, config);
            let failures = criteria::evaluate_failures(
                &snapshot,
                &model.elements,
                &thickness,
                &model.material,
                &pen.yield_thresholds,
            )?;
            let n_b = failures.n_buckled();
            out.push(QoiVector {
                n_y: failures.n_yielded(),
                n_b,
                deflection: deflections[i],
                mass: criteria::structural_mass(config, space, &model.patches, pen, n_b),
                vcg: criteria::structural_vcg(config, space, &model.patches, pen),
            });
        }
        Ok(out)
    }

    /// Penalized mass of each configuration under the surrogate.
    pub fn predict_penalized(
        &self,
        model: &HullModel,
        space: &ParameterSpace,
        pen: &PenaltyConfig,
        configs: &[Configuration],
    ) -> Result<Vec<f64>> {
        Ok(self
            .predict_qois(model, space, pen, configs)?
            .iter()
            .map(|q| criteria::penalized_mass(q, pen))
            .collect())
    }
}

// ---------------------------------------------------------------------------
// model archive

#[derive(Serialize, Deserialize)]
struct GprManifest {
    rows: usize,
    cols: usize,
    outputs: usize,
    log_sigma2: f64,
    log_length_scales: Vec<f64>,
    log_noise: f64,
}

#[derive(Serialize, Deserialize)]
struct ArchiveManifest {
    schema: u32,
    rank: usize,
    rank_policy: RankPolicy,
    space_version: u32,
    monitored_node: usize,
    n_elements: usize,
    training_configs: Vec<Vec<f64>>,
    fields: Vec<FieldManifest>,
    deflection: Vec<GprManifest>,
}

#[derive(Serialize, Deserialize)]
struct FieldManifest {
    name: String,
    degenerate: bool,
    basis_rank: usize,
    n_singular_values: usize,
    gpr: GprManifest,
}

fn gpr_manifest(g: &GprModel) -> GprManifest {
    GprManifest {
        rows: g.x_train.nrows(),
        cols: g.x_train.ncols(),
        outputs: g.y_train.ncols(),
        log_sigma2: g.log_sigma2,
        log_length_scales: g.log_length_scales.iter().copied().collect(),
        log_noise: g.log_noise,
    }
}

fn save_gpr(dir: &Path, name: &str, g: &GprModel) -> Result<()> {
    write_f64_raw(
        &dir.join(format!("{name}_x.f64")),
        g.x_train.transpose().as_slice(),
    )?;
    write_f64_raw(
        &dir.join(format!("{name}_y.f64")),
        g.y_train.transpose().as_slice(),
    )?;
    Ok(())
}

fn load_gpr(dir: &Path, name: &str, m: &GprManifest) -> Result<GprModel> {
    let x = read_f64_raw(&dir.join(format!("{name}_x.f64")))?;
    let y = read_f64_raw(&dir.join(format!("{name}_y.f64")))?;
    if x.len() != m.rows * m.cols || y.len() != m.rows * m.outputs {
        return Err(Error::Data(format!(
            "archive arrays for {name} have wrong length"
        )));
    }
    let x_train = DMatrix::from_row_slice(m.rows, m.cols, &x);
    let y_train = DMatrix::from_row_slice(m.rows, m.outputs, &y);
    GprModel::from_parts(
        x_train,
        y_train,
        m.log_sigma2,
        m.log_length_scales.clone(),
        m.log_noise,
    )
}

impl SurrogateModel {
    /// Writes the model archive: a JSON manifest plus raw little-endian f64
    /// arrays for bases and training data.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut fields = Vec::with_capacity(self.fields.len());
        for (idx, fs) in self.fields.iter().enumerate() {
            let case_idx = idx / 6;
            let comp = StressComponent::ALL[idx % 6];
            let name = format!("{}_{}", LoadKind::ALL[case_idx].name(), comp.name());
            write_f64_raw(
                &dir.join(format!("{name}_basis.f64")),
                fs.basis.basis.transpose().as_slice(),
            )?;
            write_f64_raw(
                &dir.join(format!("{name}_sv.f64")),
                fs.basis.singular_values.as_slice(),
            )?;
            save_gpr(dir, &name, &fs.gpr)?;
            fields.push(FieldManifest {
                name,
                degenerate: fs.basis.degenerate,
                basis_rank: fs.basis.rank,
                n_singular_values: fs.basis.singular_values.len(),
                gpr: gpr_manifest(&fs.gpr),
            });
        }
        let mut deflection = Vec::new();
        for (case_idx, g) in self.deflection.iter().enumerate() {
            save_gpr(dir, &format!("deflection_{case_idx}"), g)?;
            deflection.push(gpr_manifest(g));
        }
        let manifest = ArchiveManifest {
            schema: 1,
            rank: self.rank,
            rank_policy: self.rank_policy,
            space_version: self.space_version,
            monitored_node: self.monitored_node,
            n_elements: self.fields[0].basis.basis.nrows(),
            training_configs: self
                .training_configs
                .iter()
                .map(|c| c.values.clone())
                .collect(),
            fields,
            deflection,
        };
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_vec_pretty(&manifest)?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: ArchiveManifest =
            serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
        if manifest.schema != 1 {
            return Err(Error::Data("unsupported surrogate archive schema".into()));
        }
        let mut fields = Vec::with_capacity(manifest.fields.len());
        for fm in &manifest.fields {
            let basis_raw = read_f64_raw(&dir.join(format!("{}_basis.f64", fm.name)))?;
            let sv = read_f64_raw(&dir.join(format!("{}_sv.f64", fm.name)))?;
            if basis_raw.len() != manifest.n_elements * fm.basis_rank
                || sv.len() != fm.n_singular_values
            {
                return Err(Error::Data(format!(
                    "archive arrays for {} have wrong length",
                    fm.name
                )));
            }
            let basis = PodBasis {
                basis: DMatrix::from_row_slice(manifest.n_elements, fm.basis_rank, &basis_raw),
                singular_values: DVector::from_vec(sv),
                rank: fm.basis_rank,
                degenerate: fm.degenerate,
            };
            let gpr = load_gpr(dir, &fm.name, &fm.gpr)?;
            fields.push(FieldSurrogate { basis, gpr });
        }
        let mut deflection = Vec::new();
        for (case_idx, gm) in manifest.deflection.iter().enumerate() {
            deflection.push(load_gpr(dir, &format!("deflection_{case_idx}"), gm)?);
        }
        Ok(SurrogateModel {
            fields,
            deflection,
            training_configs: manifest
                .training_configs
                .into_iter()
                .map(Configuration::new)
                .collect(),
            rank: manifest.rank,
            rank_policy: manifest.rank_policy,
            space_version: manifest.space_version,
            monitored_node: manifest.monitored_node,
        })
    }
}
