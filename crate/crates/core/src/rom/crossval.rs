use super::database::{DbEntry, SnapshotDatabase};
use super::gpr::GprConfig;
use super::pod::RankPolicy;
use super::surrogate::surrogate_fit;
use crate::criteria::PenaltyConfig;
use crate::error::{Error, Result};
use crate::model::{HullModel, ParameterSpace};
use crate::util::stats::five_number_summary;

/// Held-out errors of one (rank, QoI) cell, normalized by the critical
/// threshold.
#[derive(Debug, Clone)]
pub struct CvCell {
    pub rank: usize,
    pub qoi: &'static str,
    /// `(predicted - true) / critical`, one entry per held-out sample.
    pub errors: Vec<f64>,
}

impl CvCell {
    /// (min, q1, median, q3, max) of the error distribution.
    pub fn summary(&self) -> [f64; 5] {
        five_number_summary(&self.errors).unwrap_or([0.0; 5])
    }
}

/// K-fold cross-validation of the failure-count predictions over a rank
/// grid. Folds are assigned round-robin by database order, so five entries
/// with five folds is exact leave-one-out.
pub fn cross_validate(
    db: &SnapshotDatabase,
    model: &HullModel,
    space: &ParameterSpace,
    pen: &PenaltyConfig,
    ranks: &[usize],
    folds: usize,
    gpr_cfg: &GprConfig,
) -> Result<Vec<CvCell>> {
    if folds < 2 {
        return Err(Error::Config(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    if db.len() < folds {
        return Err(Error::Data(format!(
            "database of {} entries cannot be split into {folds} folds",
            db.len()
        )));
    }
    let mut cells = Vec::with_capacity(ranks.len() * 2);
    for &rank in ranks {
        let mut err_y = Vec::new();
        let mut err_b = Vec::new();
        for fold in 0..folds {
            let mut train = SnapshotDatabase::new();
            let mut test: Vec<&DbEntry> = Vec::new();
            for (i, entry) in db.entries().iter().enumerate() {
                if i % folds == fold {
                    test.push(entry);
                } else {
                    train.insert(entry.clone())?;
                }
            }
            if train.len() < 2 {
                return Err(Error::Data(
                    "training folds must keep at least 2 entries".into(),
                ));
            }
            let surrogate = surrogate_fit(&train, model, space, &RankPolicy::Fixed(rank), gpr_cfg)?;
            let configs: Vec<_> = test.iter().map(|e| e.config.clone()).collect();
            let preds = surrogate.predict_qois(model, space, pen, &configs)?;
            for (pred, entry) in preds.iter().zip(&test) {
                err_y.push((pred.n_y as f64 - entry.qois.n_y as f64) / pen.y_crit as f64);
                err_b.push((pred.n_b as f64 - entry.qois.n_b as f64) / pen.b_crit as f64);
            }
        }
        cells.push(CvCell {
            rank,
            qoi: "n_y",
            errors: err_y,
        });
        cells.push(CvCell {
            rank,
            qoi: "n_b",
            errors: err_b,
        });
    }
    Ok(cells)
}
