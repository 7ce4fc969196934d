//! Gating priors: normal-gamma shrinkage, spike-and-slab (SSVS) and a flat
//! normal reference prior, with their conditional and marginal densities.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gating::GatingCoefficients;
use crate::error::{Error, Result};
use crate::randkit::special::{ln_gamma, log_bessel_k};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Normal-gamma hyperparameters: τ² ~ G(θ, θ), λ_k ~ G(c0, c1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NgHyper {
    pub theta: f64,
    pub c0: f64,
    pub c1: f64,
}

impl Default for NgHyper {
    fn default() -> Self {
        Self { theta: 0.1, c0: 0.01, c1: 0.01 }
    }
}

impl NgHyper {
    pub fn new(theta: f64, c0: f64, c1: f64) -> Result<Self> {
        if !(theta > 0.0 && c0 > 0.0 && c1 > 0.0) {
            return Err(Error::domain(format!("NG hyperparameters must be positive: theta={theta}, c0={c0}, c1={c1}")));
        }
        Ok(Self { theta, c0, c1 })
    }
}

/// Local scales τ² ((K-1)×P) and global scales λ (K-1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NgState {
    pub tau2: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

impl NgState {
    pub fn new(tau2: DMatrix<f64>, lambda: DVector<f64>) -> Result<Self> {
        if tau2.iter().chain(lambda.iter()).any(|v| !(*v > 0.0)) {
            return Err(Error::domain("NG scales must be strictly positive"));
        }
        if tau2.nrows() != lambda.len() {
            return Err(Error::dim("tau2 rows must match lambda length"));
        }
        Ok(Self { tau2, lambda })
    }

    pub fn ones(k: usize, p: usize) -> Self {
        Self { tau2: DMatrix::from_element(k - 1, p, 1.0), lambda: DVector::from_element(k - 1, 1.0) }
    }

    /// Conditional prior variance of β_{k,p}: (2/λ_k) τ²_{k,p}.
    pub fn variance(&self, k: usize, p: usize) -> f64 {
        2.0 / self.lambda[k] * self.tau2[(k, p)]
    }
}

/// SSVS hyperparameters: spike and slab variances and inclusion probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsvsHyper {
    pub spike_var: f64,
    pub slab_var: f64,
    pub incl_prob: f64,
}

impl Default for SsvsHyper {
    fn default() -> Self {
        Self { spike_var: 0.01, slab_var: 1.0, incl_prob: 0.5 }
    }
}

impl SsvsHyper {
    pub fn new(spike_var: f64, slab_var: f64, incl_prob: f64) -> Result<Self> {
        if !(spike_var > 0.0 && slab_var > spike_var && (0.0..=1.0).contains(&incl_prob)) {
            return Err(Error::domain(format!(
                "SSVS needs 0 < spike ({spike_var}) < slab ({slab_var}) and incl_prob in [0,1] ({incl_prob})"
            )));
        }
        Ok(Self { spike_var, slab_var, incl_prob })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsvsState {
    /// Inclusion indicators, 1 = slab.
    pub delta: DMatrix<u8>,
}

impl SsvsState {
    pub fn all_included(k: usize, p: usize) -> Self {
        Self { delta: DMatrix::from_element(k - 1, p, 1) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatHyper {
    pub prior_var: f64,
}

impl Default for FlatHyper {
    fn default() -> Self {
        Self { prior_var: 10.0 }
    }
}

/// Prior family on the gating coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GatingPrior {
    Ng(NgHyper),
    Ssvs(SsvsHyper),
    Flat(FlatHyper),
}

impl GatingPrior {
    pub fn name(&self) -> &'static str {
        match self {
            GatingPrior::Ng(_) => "ng",
            GatingPrior::Ssvs(_) => "ssvs",
            GatingPrior::Flat(_) => "flat",
        }
    }

    /// Starting state for K groups and P covariates.
    pub fn initial_state(&self, k: usize, p: usize) -> PriorState {
        match self {
            GatingPrior::Ng(_) => PriorState::Ng(NgState::ones(k, p)),
            GatingPrior::Ssvs(_) => PriorState::Ssvs(SsvsState::all_included(k, p)),
            GatingPrior::Flat(_) => PriorState::Flat,
        }
    }
}

/// Latent prior state carried by the sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PriorState {
    Ng(NgState),
    Ssvs(SsvsState),
    Flat,
}

impl PriorState {
    /// Conditional prior variance of every β_{k,p}.
    pub fn variances(&self, hyper: &GatingPrior, k: usize, p: usize) -> Result<DMatrix<f64>> {
        match (self, hyper) {
            (PriorState::Ng(s), GatingPrior::Ng(_)) => Ok(DMatrix::from_fn(k - 1, p, |r, c| s.variance(r, c))),
            (PriorState::Ssvs(s), GatingPrior::Ssvs(h)) => Ok(DMatrix::from_fn(k - 1, p, |r, c| {
                if s.delta[(r, c)] == 1 {
                    h.slab_var
                } else {
                    h.spike_var
                }
            })),
            (PriorState::Flat, GatingPrior::Flat(h)) => Ok(DMatrix::from_element(k - 1, p, h.prior_var)),
            _ => Err(Error::Config("prior state does not match prior family".into())),
        }
    }

    /// Row-relabeling consistent with [`GatingCoefficients::relabeled`]:
    /// new row j takes old row perm[j]; when perm[j] is the old baseline it
    /// takes the row of the group that becomes the new baseline.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let k = perm.len();
        let src = |j: usize| if perm[j] == k - 1 { perm[k - 1] } else { perm[j] };
        match self {
            PriorState::Ng(s) => {
                let tau2 = DMatrix::from_fn(k - 1, s.tau2.ncols(), |r, c| s.tau2[(src(r), c)]);
                let lambda = DVector::from_fn(k - 1, |r, _| s.lambda[src(r)]);
                PriorState::Ng(NgState { tau2, lambda })
            }
            PriorState::Ssvs(s) => {
                PriorState::Ssvs(SsvsState { delta: DMatrix::from_fn(k - 1, s.delta.ncols(), |r, c| s.delta[(src(r), c)]) })
            }
            PriorState::Flat => PriorState::Flat,
        }
    }
}

pub(crate) fn log_normal(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * x * x / var
}

/// Log marginal prior density of a single coefficient under the
/// normal-gamma hierarchy β ~ N(0, (2/λ)τ²), τ² ~ G(θ, θ), with τ²
/// integrated out:
///
/// log p(β) = (θ+½) log a − ½ log π − (θ−½) log 2 − log Γ(θ)
///            + (θ−½) log|β| + log K_{θ−½}(a|β|),   a = √(θλ).
///
/// `lambda2` is the scale entering `a`; under this parameterization it is
/// the group's global shrinkage λ_k itself.
pub fn log_prior_beta_marginal(beta_kp: f64, theta: f64, lambda2: f64) -> Result<f64> {
    if !(theta > 0.0 && lambda2 > 0.0) {
        return Err(Error::domain(format!("theta ({theta}) and lambda ({lambda2}) must be positive")));
    }
    let a = (theta * lambda2).sqrt();
    let nu = theta - 0.5;
    let head = (theta + 0.5) * a.ln() - 0.5 * PI.ln() - nu * std::f64::consts::LN_2 - ln_gamma(theta);
    let b = beta_kp.abs();
    if b == 0.0 {
        if theta <= 0.5 {
            return Err(Error::Pole { theta });
        }
        // |β|^ν K_ν(a|β|) → Γ(ν) 2^{ν-1} a^{-ν}
        return Ok(head + ln_gamma(nu) + (nu - 1.0) * std::f64::consts::LN_2 - nu * a.ln());
    }
    Ok(head + nu * b.ln() + log_bessel_k(nu, a * b)?)
}

/// Log conditional prior of the gating coefficients given the latent prior
/// state (τ², λ for NG; δ for SSVS).
pub fn log_prior_gating(beta: &GatingCoefficients, state: &PriorState, hyper: &GatingPrior) -> Result<f64> {
    let (k, p) = (beta.k(), beta.p());
    let var = state.variances(hyper, k, p)?;
    if var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::domain("nonpositive prior variance"));
    }
    Ok(beta.matrix().iter().zip(var.iter()).map(|(b, v)| log_normal(*b, *v)).sum())
}

/// Log prior of the gating coefficients with all latent prior variables
/// integrated out. NG uses the Bessel-form marginal with the per-group
/// `lambda` plug-in; SSVS uses the two-normal mixture.
pub fn log_marginal_prior_gating(beta: &GatingCoefficients, hyper: &GatingPrior, lambda: &[f64]) -> Result<f64> {
    let m = beta.matrix();
    let mut total = 0.0;
    match hyper {
        GatingPrior::Ng(h) => {
            if lambda.len() != m.nrows() {
                return Err(Error::dim(format!("need {} lambda values, got {}", m.nrows(), lambda.len())));
            }
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    total += log_prior_beta_marginal(m[(r, c)], h.theta, lambda[r])?;
                }
            }
        }
        GatingPrior::Ssvs(h) => {
            let (w, lw) = (h.incl_prob, (1.0 - h.incl_prob));
            for b in m.iter() {
                let a = if lw > 0.0 { lw.ln() + log_normal(*b, h.spike_var) } else { f64::NEG_INFINITY };
                let s = if w > 0.0 { w.ln() + log_normal(*b, h.slab_var) } else { f64::NEG_INFINITY };
                total += crate::marglik::logsumexp(&[a, s])?;
            }
        }
        GatingPrior::Flat(h) => {
            total = m.iter().map(|b| log_normal(*b, h.prior_var)).sum();
        }
    }
    Ok(total)
}
