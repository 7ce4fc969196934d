use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComponentConditional, Components, GatingCoefficients};
use crate::randkit::RngStream;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Full-conditional moments recorded at one sweep: a Normal for every
/// non-baseline β_k (mean and lower Cholesky factor of the precision) and
/// the conjugate component conditional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSnapshot {
    pub beta_mean: Vec<DVector<f64>>,
    pub beta_prec_chol: Vec<DMatrix<f64>>,
    /// Number of covariates P.
    pub p: usize,
    pub components: Option<ComponentConditional>,
}

impl ImportanceSnapshot {
    pub fn new(
        beta_mean: Vec<DVector<f64>>,
        beta_prec_chol: Vec<DMatrix<f64>>,
        p: usize,
        components: Option<ComponentConditional>,
    ) -> Result<Self> {
        if beta_mean.len() != beta_prec_chol.len() {
            return Err(Error::dim("one precision factor per gating mean required"));
        }
        for (m, l) in beta_mean.iter().zip(&beta_prec_chol) {
            if m.len() != p || l.nrows() != p || l.ncols() != p {
                return Err(Error::dim("precision factor does not match mean length"));
            }
            if l.diagonal().iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return Err(Error::NotPositiveDefinite("gating precision factor".into()));
            }
        }
        Ok(Self { beta_mean, beta_prec_chol, p, components })
    }

    /// Log density of the gating part at `beta`.
    pub fn log_density_beta(&self, beta: &GatingCoefficients) -> Result<f64> {
        if beta.k() - 1 != self.beta_mean.len() {
            return Err(Error::dim("gating rows differ from snapshot"));
        }
        let mut total = 0.0;
        for (k, (m, l)) in self.beta_mean.iter().zip(&self.beta_prec_chol).enumerate() {
            let e = beta.matrix().row(k).transpose() - m;
            // ‖L'e‖² = e'Qe
            let z = l.tr_mul(&e);
            let log_det: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
            total += -0.5 * m.len() as f64 * LN_2PI + log_det - 0.5 * z.norm_squared();
        }
        Ok(total)
    }

    pub fn log_density(&self, beta: &GatingCoefficients, comps: Option<&Components>) -> Result<f64> {
        let mut v = self.log_density_beta(beta)?;
        match (&self.components, comps) {
            (Some(c), Some(x)) => v += c.log_density(x)?,
            (None, None) => {}
            _ => return Err(Error::Config("snapshot and draw disagree on component parameters".into())),
        }
        Ok(v)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<(GatingCoefficients, Option<Components>)> {
        let rows = self.beta_mean.len();
        let p = self.p;
        let mut beta = DMatrix::zeros(rows, p);
        for (k, (m, l)) in self.beta_mean.iter().zip(&self.beta_prec_chol).enumerate() {
            let z = DVector::from_fn(p, |_, _| rng.normal());
            let v = l.transpose().solve_upper_triangular(&z).ok_or_else(|| Error::NotPositiveDefinite("gating precision factor".into()))?;
            beta.set_row(k, &(m + v).transpose());
        }
        let comps = match &self.components {
            Some(c) => Some(c.sample(rng)?),
            None => None,
        };
        Ok((GatingCoefficients::new(beta)?, comps))
    }
}
