use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation rank selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RankPolicy {
    Fixed(usize),
    /// Keep modes with normalized singular value `sigma_k / sigma_1 >= tau`;
    /// every discarded mode is below the threshold.
    Energy(f64),
}

impl RankPolicy {
    pub const DEFAULT_ENERGY_TAU: f64 = 0.01;
}

/// Truncated left singular basis of a snapshot matrix.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// n x r, orthonormal columns (all-zero for the degenerate basis).
    pub basis: DMatrix<f64>,
    /// Full singular value spectrum, descending.
    pub singular_values: DVector<f64>,
    pub rank: usize,
    /// Degenerate marker for identically-zero snapshot components; the basis
    /// is a single zero column so downstream code needs no special cases.
    pub degenerate: bool,
}

impl PodBasis {
    /// Rank-1 zero basis for an all-zero field (the out-of-plane components
    /// of the plane-stress solver).
    pub fn zero(n: usize) -> Self {
        Self {
            basis: DMatrix::zeros(n, 1),
            singular_values: DVector::zeros(1),
            rank: 1,
            degenerate: true,
        }
    }

    /// Reduced coefficients of one snapshot column: `c = U^T s`.
    pub fn reduce(&self, snapshot: &DVector<f64>) -> Result<DVector<f64>> {
        if snapshot.len() != self.basis.nrows() {
            return Err(Error::Data(format!(
                "snapshot length {} does not match basis rows {}",
                snapshot.len(),
                self.basis.nrows()
            )));
        }
        Ok(self.basis.transpose() * snapshot)
    }

    /// Reconstruction from reduced coefficients: `s = U c`.
    pub fn reconstruct(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.rank {
            return Err(Error::Data(format!(
                "coefficient length {} does not match rank {}",
                coeffs.len(),
                self.rank
            )));
        }
        Ok(&self.basis * coeffs)
    }

    /// Normalized spectrum `sigma_k / sigma_1`.
    pub fn normalized_spectrum(&self) -> Vec<f64> {
        let s1 = self.singular_values[0];
        if s1 == 0.0 {
            return vec![0.0; self.singular_values.len()];
        }
        self.singular_values.iter().map(|s| s / s1).collect()
    }
}

/// Rank implied by a policy on a descending spectrum, clamped to [1, len].
pub fn policy_rank(singular_values: &DVector<f64>, policy: &RankPolicy) -> usize {
    let len = singular_values.len();
    match policy {
        RankPolicy::Fixed(r) => (*r).clamp(1, len),
        RankPolicy::Energy(tau) => {
            let s1 = singular_values[0];
            if s1 == 0.0 {
                return 1;
            }
            let r = singular_values.iter().filter(|&&s| s / s1 >= *tau).count();
            r.clamp(1, len)
        }
    }
}

/// Thin SVD of the snapshot matrix truncated per the rank policy.
pub fn pod_fit(snapshots: &DMatrix<f64>, policy: &RankPolicy) -> Result<PodBasis> {
    if snapshots.ncols() == 0 {
        return Err(Error::Data("empty snapshot matrix".into()));
    }
    if snapshots.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("snapshot matrix has non-finite entries".into()));
    }
    if snapshots.iter().all(|&v| v == 0.0) {
        return Err(Error::Data(
            "degenerate basis: all-zero snapshot matrix".into(),
        ));
    }
    let svd = snapshots.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let s = svd.singular_values;
    // nalgebra sorts descending; defend against ties/ordering drift anyway.
    debug_assert!(s.iter().zip(s.iter().skip(1)).all(|(a, b)| a >= b));
    let rank = policy_rank(&s, policy);
    Ok(PodBasis {
        basis: u.columns(0, rank).into_owned(),
        singular_values: s,
        rank,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn single_snapshot_is_normalized() {
        let m = DMatrix::from_column_slice(3, 1, &[3.0, 0.0, 4.0]);
        let pod = pod_fit(&m, &RankPolicy::Energy(0.01)).unwrap();
        assert_eq!(pod.rank, 1);
        assert!((pod.singular_values[0] - 5.0).abs() < 1e-12);
        let col = pod.basis.column(0);
        assert!((col.norm() - 1.0).abs() < 1e-12);
        assert!((col[0].abs() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_columns_give_their_norms() {
        // columns (3,0,0) and (0,4,0): singular values (4, 3)
        let m = DMatrix::from_column_slice(3, 2, &[3.0, 0.0, 0.0, 0.0, 4.0, 0.0]);
        let pod = pod_fit(&m, &RankPolicy::Fixed(2)).unwrap();
        assert!((pod.singular_values[0] - 4.0).abs() < 1e-12);
        assert!((pod.singular_values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn frobenius_reconstruction_identity() {
        let mut rng = crate::util::rng::stream(5, "pod-unit", &[]);
        let n = 40;
        let m = 12;
        let mat = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        for r in [1usize, 3, 7, 12] {
            let pod = pod_fit(&mat, &RankPolicy::Fixed(r)).unwrap();
            let coeffs = pod.basis.transpose() * &mat;
            let recon = &pod.basis * coeffs;
            let err = (&mat - recon).norm();
            let expect: f64 = pod
                .singular_values
                .iter()
                .skip(r)
                .map(|s| s * s)
                .sum::<f64>()
                .sqrt();
            // at full rank the identity degenerates to pure roundoff
            assert!(
                (err - expect).abs() <= 1e-8 * expect + 1e-10 * mat.norm(),
                "rank {r}: err {err} vs expect {expect}"
            );
        }
    }

    #[test]
    fn orthonormality_of_retained_basis() {
        let mut rng = crate::util::rng::stream(6, "pod-unit", &[]);
        let mat = DMatrix::from_fn(30, 10, |_, _| rng.random_range(-2.0..2.0));
        let pod = pod_fit(&mat, &RankPolicy::Energy(0.01)).unwrap();
        let gram = pod.basis.transpose() * &pod.basis;
        for i in 0..pod.rank {
            for j in 0..pod.rank {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn energy_policy_discards_below_threshold() {
        // diagonal matrix with spectrum 1, 0.5, 0.009
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 0.5;
        m[(2, 2)] = 0.009;
        let pod = pod_fit(&m, &RankPolicy::Energy(0.01)).unwrap();
        assert_eq!(pod.rank, 2);
        let spectrum = pod.normalized_spectrum();
        assert!(spectrum[..pod.rank].iter().all(|&s| s >= 0.01));
        assert!(spectrum[pod.rank..].iter().all(|&s| s < 0.01));
    }

    #[test]
    fn projection_identities() {
        let mut rng = crate::util::rng::stream(7, "pod-unit", &[]);
        let mat = DMatrix::from_fn(20, 6, |_, _| rng.random_range(-1.0..1.0));
        let pod = pod_fit(&mat, &RankPolicy::Fixed(3)).unwrap();

        // a column already in the span reconstructs exactly
        let s_in = pod.basis.column(0).into_owned() * 2.5 - pod.basis.column(2).into_owned() * 0.5;
        let c = pod.reduce(&s_in).unwrap();
        let back = pod.reconstruct(&c).unwrap();
        assert!((back - &s_in).norm() < 1e-10);

        // a random vector obeys Pythagoras: |s|^2 = |Uc|^2 + |s - Uc|^2
        let s: DVector<f64> = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
        let c = pod.reduce(&s).unwrap();
        let proj = pod.reconstruct(&c).unwrap();
        let lhs = s.norm_squared();
        let rhs = proj.norm_squared() + (&s - proj).norm_squared();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.max(1.0));

        // a vector orthogonal to the span reduces to zero
        let mut orth = s.clone();
        let c = pod.reduce(&orth).unwrap();
        orth -= pod.reconstruct(&c).unwrap();
        let c_orth = pod.reduce(&orth).unwrap();
        assert!(c_orth.norm() < 1e-10);
    }

    #[test]
    fn all_zero_matrix_is_an_error() {
        let m = DMatrix::zeros(5, 3);
        assert!(pod_fit(&m, &RankPolicy::Energy(0.01)).is_err());
    }

    #[test]
    fn zero_basis_round_trips_zeros() {
        let z = PodBasis::zero(4);
        let c = z.reduce(&DVector::from_element(4, 3.0)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0], 0.0);
        let s = z.reconstruct(&c).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let pod = pod_fit(&m, &RankPolicy::Fixed(1)).unwrap();
        assert!(pod.reduce(&DVector::zeros(4)).is_err());
        assert!(pod.reconstruct(&DVector::zeros(2)).is_err());
    }
}
