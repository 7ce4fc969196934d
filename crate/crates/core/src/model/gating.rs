//! Multinomial-logit gating network with group K as the zero baseline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marglik::logsumexp;

/// Logit coefficients for groups 1..K-1, one row per group; the baseline
/// group K is the implicit zero row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatingCoefficients {
    beta: DMatrix<f64>,
}

impl GatingCoefficients {
    pub fn new(beta: DMatrix<f64>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("gating coefficients must be finite"));
        }
        Ok(Self { beta })
    }

    pub fn zeros(k: usize, p: usize) -> Self {
        Self { beta: DMatrix::zeros(k.saturating_sub(1), p) }
    }

    /// Number of groups K (rows + baseline).
    pub fn k(&self) -> usize {
        self.beta.nrows() + 1
    }

    pub fn p(&self) -> usize {
        self.beta.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.beta
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.beta
    }

    /// Linear predictors x'β_k for all K groups (baseline entry 0).
    pub fn linear_predictors(&self, x_row: &[f64]) -> Result<Vec<f64>> {
        if x_row.len() != self.p() {
            return Err(Error::dim(format!("covariate row has {} entries, beta has {} columns", x_row.len(), self.p())));
        }
        let mut eta = Vec::with_capacity(self.k());
        for r in 0..self.beta.nrows() {
            eta.push(self.beta.row(r).iter().zip(x_row).map(|(b, x)| b * x).sum());
        }
        eta.push(0.0);
        Ok(eta)
    }

    /// N×K matrix of log gating probabilities for every row of `x`.
    pub fn log_probs_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::dim(format!("covariates have {} columns, beta has {}", x.ncols(), self.p())));
        }
        let k = self.k();
        let lin = x * self.beta.transpose();
        let mut out = DMatrix::zeros(x.nrows(), k);
        let mut row = vec![0.0; k];
        for i in 0..x.nrows() {
            for j in 0..k - 1 {
                row[j] = lin[(i, j)];
            }
            row[k - 1] = 0.0;
            let lse = logsumexp(&row).expect("non-empty");
            for j in 0..k {
                out[(i, j)] = row[j] - lse;
            }
        }
        Ok(out)
    }

    /// Re-expresses the coefficients after relabeling groups so that new
    /// group `j` is old group `perm[j]` (0-based). The new baseline is old
    /// group `perm[K-1]`: β_j^new = β_{perm[j]} - β_{perm[K-1]}.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let k = self.k();
        debug_assert_eq!(perm.len(), k);
        let p = self.p();
        let row = |g: usize| -> Vec<f64> {
            if g == k - 1 {
                vec![0.0; p]
            } else {
                self.beta.row(g).iter().copied().collect()
            }
        };
        let base = row(perm[k - 1]);
        let mut beta = DMatrix::zeros(k - 1, p);
        for j in 0..k - 1 {
            let src = row(perm[j]);
            for c in 0..p {
                beta[(j, c)] = if perm[k - 1] == k - 1 { src[c] } else { src[c] - base[c] };
            }
        }
        Self { beta }
    }
}

/// Log gating probabilities for one covariate row; max-subtracted, so
/// linear predictors of several hundred in magnitude do not overflow.
pub fn gating_log_probs(x_row: &[f64], beta: &GatingCoefficients) -> Result<Vec<f64>> {
    let eta = beta.linear_predictors(x_row)?;
    let lse = logsumexp(&eta)?;
    Ok(eta.into_iter().map(|e| e - lse).collect())
}

pub fn gating_probs(x_row: &[f64], beta: &GatingCoefficients) -> Result<Vec<f64>> {
    Ok(gating_log_probs(x_row, beta)?.into_iter().map(f64::exp).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_coefficients_are_uniform() {
        let b = GatingCoefficients::zeros(4, 3);
        let p = gating_probs(&[1.0, -2.0, 0.5], &b).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn two_group_logit() {
        let b = GatingCoefficients::new(DMatrix::from_element(1, 1, 3f64.ln())).unwrap();
        let p = gating_probs(&[1.0], &b).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn extreme_predictors_do_not_overflow() {
        let x = [1.0, 1.0];
        let b = GatingCoefficients::new(DMatrix::from_row_slice(2, 2, &[250.0, 250.0, -250.0, -250.0])).unwrap();
        let p = gating_probs(&x, &b).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let b = GatingCoefficients::new(DMatrix::from_row_slice(2, 1, &[700.0, -700.0])).unwrap();
        let p = gating_probs(&[1.0], &b).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let b = GatingCoefficients::zeros(3, 2);
        assert!(gating_probs(&[1.0], &b).is_err());
    }

    #[test]
    fn relabel_permutes_probabilities() {
        let b = GatingCoefficients::new(DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 1.2, 0.4])).unwrap();
        let x = [1.0, 0.7];
        let p = gating_probs(&x, &b).unwrap();
        for perm in [[0, 1, 2], [2, 0, 1], [1, 2, 0], [0, 2, 1]] {
            let q = gating_probs(&x, &b.relabeled(&perm)).unwrap();
            for j in 0..3 {
                assert!((q[j] - p[perm[j]]).abs() < 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(
            coefs in proptest::collection::vec(-50.0f64..50.0, 6),
            x in proptest::collection::vec(-5.0f64..5.0, 2),
        ) {
            let b = GatingCoefficients::new(DMatrix::from_row_slice(3, 2, &coefs)).unwrap();
            let p = gating_probs(&x, &b).unwrap();
            prop_assert!(p.iter().all(|v| *v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn consistent_column_permutation_is_invariant(
            coefs in proptest::collection::vec(-5.0f64..5.0, 6),
            x in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let b = DMatrix::from_row_slice(2, 3, &coefs);
            let p = gating_probs(&x, &GatingCoefficients::new(b.clone()).unwrap()).unwrap();
            let order = [2usize, 0, 1];
            let bp = DMatrix::from_fn(2, 3, |r, c| b[(r, order[c])]);
            let xp: Vec<f64> = order.iter().map(|&c| x[c]).collect();
            let q = gating_probs(&xp, &GatingCoefficients::new(bp).unwrap()).unwrap();
            for j in 0..3 {
                prop_assert!((p[j] - q[j]).abs() < 1e-12);
            }
        }
    }
}
