use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{logsumexp, ImportanceSnapshot};
use crate::error::{Error, Result};
use crate::gibbs::{posterior_mean_lambda, DrawsStore};
use crate::model::{
    log_marginal_prior_gating, log_prior_components, mixture_loglik_from, Components, Dataset, GatingCoefficients,
    GatingPrior,
};
use crate::randkit::RngStream;

/// One value of the bridged parameter Θ = (β, component parameters).
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaDraw {
    pub beta: GatingCoefficients,
    pub components: Option<Components>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BridgeSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeResult {
    pub log_ml: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start_log_ml_is: f64,
    pub start_log_ml_ris: f64,
    /// |log p̂_t − log p̂_{t−1}| at the last iteration.
    pub rel_step_at_stop: f64,
    /// Approximate standard error of `log_ml` from the relative-MSE
    /// expansion, ignoring autocorrelation of the MCMC draws.
    pub se_proxy: f64,
    /// Per-group λ plugged into the NG marginal prior (empty otherwise).
    pub lambda_plugin: Vec<f64>,
    pub n_mcmc: usize,
    pub n_importance: usize,
    /// Step sizes of every iteration.
    pub steps: Vec<f64>,
}

/// Unnormalized posterior of Θ: observed-data likelihood times the
/// component prior times the gating prior with latent scales integrated.
pub struct PosteriorTarget<'a> {
    pub data: &'a Dataset,
    pub prior: GatingPrior,
    pub lambda: Vec<f64>,
}

impl PosteriorTarget<'_> {
    pub fn log_unnorm_posterior(&self, draw: &ThetaDraw) -> Result<f64> {
        let comps = draw.components.as_ref().ok_or_else(|| Error::Config("posterior needs component parameters".into()))?;
        let lf = comps.loglik_matrix(self.data.responses())?;
        let ll = mixture_loglik_from(&lf, &draw.beta, self.data.covariates())?;
        let lg = if draw.beta.k() > 1 { log_marginal_prior_gating(&draw.beta, &self.prior, &self.lambda)? } else { 0.0 };
        Ok(ll + log_prior_components(comps)? + lg)
    }
}

/// Log of the uniform snapshot mixture density at `draw`.
pub fn log_q(draw: &ThetaDraw, snapshots: &[ImportanceSnapshot]) -> Result<f64> {
    if snapshots.is_empty() {
        return Err(Error::Empty("no importance snapshots".into()));
    }
    let terms = snapshots
        .iter()
        .map(|s| s.log_density(&draw.beta, draw.components.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(logsumexp(&terms)? - (snapshots.len() as f64).ln())
}

/// `count` i.i.d. draws from the uniform snapshot mixture.
pub fn draw_importance(snapshots: &[ImportanceSnapshot], count: usize, rng: &mut RngStream) -> Result<Vec<ThetaDraw>> {
    if snapshots.is_empty() || count == 0 {
        return Err(Error::Empty("importance sampling needs snapshots and a positive draw count".into()));
    }
    (0..count)
        .map(|_| {
            let s = &snapshots[rng.index(snapshots.len())];
            let (beta, components) = s.sample(rng)?;
            Ok(ThetaDraw { beta, components })
        })
        .collect()
}

/// Iterate the optimal bridge recursion on precomputed log densities:
/// `lp_*` = log p*, `lq_*` = log q at the posterior (`m`) and importance
/// (`l`) draws. Everything stays on the log scale.
pub fn bridge_recursion(
    lp_m: &[f64],
    lq_m: &[f64],
    lp_l: &[f64],
    lq_l: &[f64],
    settings: BridgeSettings,
) -> Result<BridgeResult> {
    let (m, l) = (lp_m.len(), lp_l.len());
    if m == 0 || l == 0 || lq_m.len() != m || lq_l.len() != l {
        return Err(Error::dim("bridge inputs must be non-empty and paired"));
    }
    if lp_m.iter().chain(lq_m).chain(lp_l).chain(lq_l).any(|v| v.is_nan()) {
        return Err(Error::domain("NaN in bridge inputs"));
    }
    let (log_m, log_l) = ((m as f64).ln(), (l as f64).ln());
    let w_is: Vec<f64> = lp_l.iter().zip(lq_l).map(|(p, q)| p - q).collect();
    let start_is = logsumexp(&w_is)? - log_l;
    let w_ris: Vec<f64> = lq_m.iter().zip(lp_m).map(|(q, p)| q - p).collect();
    let start_ris = -(logsumexp(&w_ris)? - log_m);

    let mut est = start_is;
    let mut steps = Vec::new();
    let mut converged = false;
    let mut num = vec![0.0; l];
    let mut den = vec![0.0; m];
    for _ in 0..settings.max_iter {
        for i in 0..l {
            num[i] = lp_l[i] - lse2(log_l + lq_l[i], log_m + lp_l[i] - est);
        }
        for i in 0..m {
            den[i] = lq_m[i] - lse2(log_l + lq_m[i], log_m + lp_m[i] - est);
        }
        let next = logsumexp(&num)? - log_l - (logsumexp(&den)? - log_m);
        let step = (next - est).abs();
        steps.push(step);
        est = next;
        if step < settings.tol {
            converged = true;
            break;
        }
    }
    if !est.is_finite() {
        return Err(Error::domain("bridge estimate is not finite"));
    }
    let se_proxy = relative_error(lp_m, lq_m, lp_l, lq_l, est);
    Ok(BridgeResult {
        log_ml: est,
        iterations: steps.len(),
        converged,
        start_log_ml_is: start_is,
        start_log_ml_ris: start_ris,
        rel_step_at_stop: steps.last().copied().unwrap_or(f64::INFINITY),
        se_proxy,
        lambda_plugin: Vec::new(),
        n_mcmc: m,
        n_importance: l,
        steps,
    })
}

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// sqrt of the first-order relative MSE of the bridge estimator.
fn relative_error(lp_m: &[f64], lq_m: &[f64], lp_l: &[f64], lq_l: &[f64], est: f64) -> f64 {
    let (m, l) = (lp_m.len() as f64, lp_l.len() as f64);
    let f1: Vec<f64> =
        lp_l.iter().zip(lq_l).map(|(p, q)| p - est - lse2(l.ln() + q, m.ln() + p - est)).collect();
    let f2: Vec<f64> = lq_m.iter().zip(lp_m).map(|(q, p)| q - lse2(l.ln() + q, m.ln() + p - est)).collect();
    let cv2 = |v: &[f64]| {
        let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = v.iter().map(|x| (x - mx).exp()).collect();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / e.len() as f64;
        var / (mean * mean)
    };
    (cv2(&f1) / l + cv2(&f2) / m).sqrt()
}

fn evaluate(target: &PosteriorTarget<'_>, snapshots: &[ImportanceSnapshot], draws: &[ThetaDraw]) -> Result<(Vec<f64>, Vec<f64>)> {
    let pairs = draws
        .par_iter()
        .map(|d| Ok((target.log_unnorm_posterior(d)?, log_q(d, snapshots)?)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Bridge estimate of log p(y) from posterior draws and importance draws.
pub fn bridge_estimate(
    mcmc: &[ThetaDraw],
    importance: &[ThetaDraw],
    snapshots: &[ImportanceSnapshot],
    target: &PosteriorTarget<'_>,
    settings: BridgeSettings,
) -> Result<BridgeResult> {
    let (lp_m, lq_m) = evaluate(target, snapshots, mcmc)?;
    let (lp_l, lq_l) = evaluate(target, snapshots, importance)?;
    let mut r = bridge_recursion(&lp_m, &lq_m, &lp_l, &lq_l, settings)?;
    r.lambda_plugin = target.lambda.clone();
    Ok(r)
}

/// Per-draw audit values of one bridge run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BridgeAudit {
    pub lp_mcmc: Vec<f64>,
    pub lq_mcmc: Vec<f64>,
    pub lp_imp: Vec<f64>,
    pub lq_imp: Vec<f64>,
}

/// Bridge sampling on the (unidentified, randomly permuted) draws of a
/// finished chain. L defaults to the number of saved draws.
pub fn bridge_from_store(
    store: &DrawsStore,
    data: &Dataset,
    n_importance: Option<usize>,
    settings: BridgeSettings,
    rng: &mut RngStream,
) -> Result<(BridgeResult, BridgeAudit)> {
    if store.components.len() != store.len() {
        return Err(Error::Config("bridge sampling needs component draws".into()));
    }
    let lambda = match store.config.prior {
        GatingPrior::Ng(_) if store.k() > 1 => {
            posterior_mean_lambda(store).ok_or_else(|| Error::Config("missing NG draws".into()))?.iter().copied().collect()
        }
        _ => Vec::new(),
    };
    let target = PosteriorTarget { data, prior: store.config.prior, lambda };
    let mcmc: Vec<ThetaDraw> = store
        .beta
        .iter()
        .zip(&store.components)
        .map(|(b, c)| ThetaDraw { beta: b.clone(), components: Some(c.clone()) })
        .collect();
    let imp = draw_importance(&store.snapshots, n_importance.unwrap_or(store.len()), rng)?;
    let (lp_m, lq_m) = evaluate(&target, &store.snapshots, &mcmc)?;
    let (lp_l, lq_l) = evaluate(&target, &store.snapshots, &imp)?;
    let mut r = bridge_recursion(&lp_m, &lq_m, &lp_l, &lq_l, settings)?;
    r.lambda_plugin = target.lambda.clone();
    Ok((r, BridgeAudit { lp_mcmc: lp_m, lq_mcmc: lq_m, lp_imp: lp_l, lq_imp: lq_l }))
}
