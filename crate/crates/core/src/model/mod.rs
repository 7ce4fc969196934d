//! Mixture-of-experts model: data, gating network, priors and component
//! densities.

pub mod component;
pub mod data;
pub mod gating;
pub mod prior;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use component::{
    log_prior_components, BernoulliComponent, ComponentConditional, Components, GaussianComponent, NiwParams,
};
pub use data::{Dataset, Family};
pub use gating::{gating_log_probs, gating_probs, GatingCoefficients};
pub use prior::{
    log_marginal_prior_gating, log_prior_beta_marginal, log_prior_gating, FlatHyper, GatingPrior, NgHyper, NgState,
    PriorState, SsvsHyper, SsvsState,
};

use crate::error::{Error, Result};
use crate::marglik::logsumexp;

/// Latent class memberships, stored 0-based; rendered 1-based in files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    s: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(s: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = s.iter().find(|&&v| v >= k) {
            return Err(Error::domain(format!("label {} outside 1..{k}", bad + 1)));
        }
        Ok(Self { s, k })
    }

    /// Build from 1-based labels.
    pub fn from_one_based(s: &[usize], k: usize) -> Result<Self> {
        if s.iter().any(|&v| v == 0) {
            return Err(Error::domain("one-based labels must be >= 1"));
        }
        Self::new(s.iter().map(|v| v - 1).collect(), k)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.s
    }

    pub fn as_mut_slice(&mut self) -> &mut [usize] {
        &mut self.s
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &v in &self.s {
            c[v] += 1;
        }
        c
    }

    /// Observation in old class perm[j] moves to class j.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0; perm.len()];
        for (j, &p) in perm.iter().enumerate() {
            inv[p] = j;
        }
        Self { s: self.s.iter().map(|&v| inv[v]).collect(), k: self.k }
    }
}

/// Observed-data log likelihood Σ_i log Σ_k η_k(x_i) f_k(y_i).
pub fn mixture_loglik(data: &Dataset, beta: &GatingCoefficients, comps: &Components) -> Result<f64> {
    let lf = comps.loglik_matrix(data.responses())?;
    mixture_loglik_from(&lf, beta, data.covariates())
}

/// Same as [`mixture_loglik`] with a precomputed N×K component log-density
/// matrix.
pub fn mixture_loglik_from(lf: &DMatrix<f64>, beta: &GatingCoefficients, x: &DMatrix<f64>) -> Result<f64> {
    if beta.k() != lf.ncols() {
        return Err(Error::dim(format!("gating has {} groups, components have {}", beta.k(), lf.ncols())));
    }
    let lp = beta.log_probs_matrix(x)?;
    let k = lf.ncols();
    let mut buf = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..lf.nrows() {
        for c in 0..k {
            buf[c] = lp[(i, c)] + lf[(i, c)];
        }
        total += logsumexp(&buf)?;
    }
    Ok(total)
}
