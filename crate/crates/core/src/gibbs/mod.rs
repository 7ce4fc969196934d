//! Gibbs sampler for the mixture of experts with Pólya-Gamma augmented
//! gating updates and random permutation sampling.

mod store;
pub mod updates;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use store::{DrawsStore, ParamSummary, RelabelManifest, RunStats};
pub use updates::{
    beta_conditional, draw_lambda, draw_tau2, membership_probs, offsets, ssvs_inclusion_prob, update_components, update_gating,
    update_labels, update_omega, update_shrinkage_ng, update_ssvs, BetaConditional,
};

use crate::error::{Error, Result};
use crate::ident::kmeans;
use crate::marglik::ImportanceSnapshot;
use crate::model::{
    BernoulliComponent, Components, Dataset, Family, GatingCoefficients, GatingPrior, GaussianComponent, LabelVector,
    NiwParams, PriorState,
};
use crate::randkit::RngStream;

/// Sampler settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub k: usize,
    pub n_burn: usize,
    pub n_save: usize,
    pub thin: usize,
    pub prior: GatingPrior,
    pub family: Family,
    pub snapshot_count: usize,
    pub seed: u64,
    pub stream: u64,
    /// Conclude every sweep with a uniformly random relabeling.
    pub permute: bool,
    pub bernoulli_a0: f64,
    pub bernoulli_b0: f64,
    /// Gaussian component prior; defaults to the data-based NIW.
    pub niw: Option<NiwParams>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            k: 2,
            n_burn: 1000,
            n_save: 5000,
            thin: 1,
            prior: GatingPrior::Ng(Default::default()),
            family: Family::Bernoulli,
            snapshot_count: 100,
            seed: 1,
            stream: 0,
            permute: true,
            bernoulli_a0: 1.0,
            bernoulli_b0: 1.0,
            niw: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.n_save == 0 || self.thin == 0 {
            return Err(Error::Config("n_save and thin must be at least 1".into()));
        }
        if self.snapshot_count > self.n_save {
            return Err(Error::Config(format!(
                "snapshot_count ({}) exceeds n_save ({})",
                self.snapshot_count, self.n_save
            )));
        }
        if !(self.bernoulli_a0 > 0.0 && self.bernoulli_b0 > 0.0) {
            return Err(Error::Config("Beta hyperparameters must be positive".into()));
        }
        match self.prior {
            GatingPrior::Ng(h) => {
                crate::model::NgHyper::new(h.theta, h.c0, h.c1)?;
            }
            GatingPrior::Ssvs(h) => {
                crate::model::SsvsHyper::new(h.spike_var, h.slab_var, h.incl_prob)?;
            }
            GatingPrior::Flat(h) => {
                if !(h.prior_var > 0.0) {
                    return Err(Error::Config("flat prior variance must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Current values of every block of the sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub labels: LabelVector,
    pub beta: GatingCoefficients,
    pub prior_state: PriorState,
    pub omega: DMatrix<f64>,
    pub components: Option<Components>,
}

impl ChainState {
    /// Relabel every block: new group j is old group perm[j].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            labels: self.labels.relabeled(perm),
            beta: self.beta.relabeled(perm),
            prior_state: self.prior_state.relabeled(perm),
            omega: self.omega.clone(),
            components: self.components.as_ref().map(|c| c.relabeled(perm)),
        }
    }
}

/// Apply a uniformly drawn label permutation; returns the permutation used.
pub fn permute_step(state: &mut ChainState, rng: &mut RngStream) -> Vec<usize> {
    let k = state.beta.k();
    let perm = rng.permutation(k);
    if perm.iter().enumerate().any(|(j, &p)| j != p) {
        *state = state.permuted(&perm);
    }
    perm
}

fn initial_components(config: &ChainConfig, data: &Dataset) -> Result<Components> {
    let k = config.k;
    Ok(match config.family {
        Family::Bernoulli => {
            let mut b = BernoulliComponent::uniform(k, data.j());
            b.a0.fill(config.bernoulli_a0);
            b.b0.fill(config.bernoulli_b0);
            Components::Bernoulli(b)
        }
        Family::Gaussian => {
            let niw = match &config.niw {
                Some(n) => n.clone(),
                None => NiwParams::from_data(data.responses())?,
            };
            let d = data.j();
            if niw.dim() != d {
                return Err(Error::Config(format!("NIW prior has dimension {}, data has {d}", niw.dim())));
            }
            let sigma = vec![niw.psi.clone() / (niw.nu - d as f64 + 1.0).max(1.0); k];
            let mu = DMatrix::from_fn(k, d, |_, c| niw.m[c]);
            Components::Gaussian(GaussianComponent::new(mu, sigma, niw)?)
        }
    })
}

/// Starting labels from k-means on standardized responses.
fn initial_labels(data: &Dataset, k: usize, rng: &mut RngStream) -> Result<LabelVector> {
    let y = data.responses();
    if k == 1 {
        return LabelVector::new(vec![0; y.nrows()], 1);
    }
    let mut z = y.clone();
    for mut col in z.column_iter_mut() {
        let m = col.mean();
        let sd = col.variance().sqrt();
        col.apply(|v| *v = if sd > 0.0 { (*v - m) / sd } else { 0.0 });
    }
    let s = match kmeans(&z, k, 5, 100, rng) {
        Ok(fit) => fit.assignments,
        Err(_) => (0..y.nrows()).map(|_| rng.index(k)).collect(),
    };
    LabelVector::new(s, k)
}

fn snapshot_schedule(m: usize, s: usize, rng: &mut RngStream) -> Vec<bool> {
    let mut flags = vec![false; m];
    for &i in rng.permutation(m).iter().take(s) {
        flags[i] = true;
    }
    flags
}

/// Starting state: k-means labels, component parameters drawn from their
/// conditional given those labels, zero gating coefficients.
pub fn initial_state(config: &ChainConfig, data: &Dataset, rng: &mut RngStream) -> Result<ChainState> {
    let (k, n, p) = (config.k, data.n(), data.p());
    let labels = initial_labels(data, k, rng)?;
    let comps0 = initial_components(config, data)?;
    let (comps, _) = update_components(&comps0, data.responses(), labels.as_slice(), rng)?;
    Ok(ChainState {
        labels,
        beta: GatingCoefficients::zeros(k, p),
        prior_state: config.prior.initial_state(k, p),
        omega: DMatrix::from_element(n, k - 1, 0.25),
        components: Some(comps),
    })
}

/// Full conditionals used during one sweep.
pub struct SweepOutput {
    pub beta_conds: Vec<BetaConditional>,
    pub comp_cond: Option<crate::model::ComponentConditional>,
}

/// One Gibbs sweep without the permutation step: labels, interleaved
/// (ω_k, β_k), shrinkage or inclusion indicators, component parameters.
pub fn sweep(
    state: &mut ChainState,
    data: &Dataset,
    config: &ChainConfig,
    rng: &mut RngStream,
    stats: &mut RunStats,
) -> Result<SweepOutput> {
    let comps = state.components.as_ref().ok_or_else(|| Error::Config("sweep needs component parameters".into()))?;
    if config.k > 1 {
        let lf = comps.loglik_matrix(data.responses())?;
        let lp = state.beta.log_probs_matrix(data.covariates())?;
        state.labels = updates::labels_from(&lf, &lp, rng)?;
    }
    let beta_conds = sweep_gating(state, data.covariates(), config, rng, stats)?;
    let comps = state.components.as_ref().expect("checked above");
    let (next, comp_cond) = update_components(comps, data.responses(), state.labels.as_slice(), rng)?;
    stats.empty_components += state.labels.counts().iter().filter(|&&c| c == 0).count();
    state.components = Some(next);
    Ok(SweepOutput { beta_conds, comp_cond: Some(comp_cond) })
}

/// Run the full mixture-of-experts sampler.
///
/// Every sweep is followed by a random permutation (unless disabled).
/// Snapshot moments are recorded before the permutation of their sweep.
pub fn run_chain(config: &ChainConfig, data: &Dataset) -> Result<DrawsStore> {
    config.validate()?;
    data.validate_family(config.family)?;
    let mut rng = RngStream::new(config.seed, config.stream);
    let (k, n, p) = (config.k, data.n(), data.p());
    let mut state = initial_state(config, data, &mut rng)?;
    let snap_at = snapshot_schedule(config.n_save, config.snapshot_count, &mut rng);
    let mut store = DrawsStore::new(config.clone(), n, p, data.j());
    let total = config.n_burn + config.n_save * config.thin;
    let started = std::time::Instant::now();
    info!("running {total} sweeps (K = {k}, N = {n}, P = {p}, prior = {})", config.prior.name());
    let mut saved = 0;
    for it in 0..total {
        let out = sweep(&mut state, data, config, &mut rng, &mut store.stats)?;
        let keep = it >= config.n_burn && (it - config.n_burn + 1) % config.thin == 0;
        if keep && snap_at[saved] {
            store.snapshots.push(ImportanceSnapshot::new(
                out.beta_conds.iter().map(|c| c.mean.clone()).collect(),
                out.beta_conds.iter().map(|c| c.prec_chol.clone()).collect(),
                p,
                out.comp_cond,
            )?);
            store.snapshot_iters.push(saved);
        }
        let perm = if config.permute && k > 1 { permute_step(&mut state, &mut rng) } else { (0..k).collect() };
        if keep {
            store.push(&state, perm);
            saved += 1;
        }
        if (it + 1) % 1000 == 0 {
            debug!("sweep {}/{total}", it + 1);
        }
    }
    store.stats.runtime_sec = started.elapsed().as_secs_f64();
    Ok(store)
}

fn sweep_gating(
    state: &mut ChainState,
    x: &DMatrix<f64>,
    config: &ChainConfig,
    rng: &mut RngStream,
    stats: &mut RunStats,
) -> Result<Vec<BetaConditional>> {
    if config.k == 1 {
        return Ok(Vec::new());
    }
    let conds = update_gating(
        &mut state.beta,
        &mut state.omega,
        x,
        state.labels.as_slice(),
        &state.prior_state,
        &config.prior,
        rng,
    )?;
    stats.jitter_retries += conds.iter().filter(|c| c.jittered).count();
    match (&mut state.prior_state, &config.prior) {
        (PriorState::Ng(s), GatingPrior::Ng(h)) => update_shrinkage_ng(&state.beta, s, h, rng)?,
        (PriorState::Ssvs(s), GatingPrior::Ssvs(h)) => update_ssvs(&state.beta, s, h, rng),
        (PriorState::Flat, GatingPrior::Flat(_)) => {}
        _ => return Err(Error::Config("prior state does not match prior family".into())),
    }
    Ok(conds)
}

/// Sampler for the multinomial logit alone, with memberships observed.
/// No component parameters and no permutation step.
pub fn run_logit_chain(config: &ChainConfig, x: &DMatrix<f64>, labels: &LabelVector) -> Result<DrawsStore> {
    config.validate()?;
    if labels.len() != x.nrows() {
        return Err(Error::dim("labels and covariates differ in length"));
    }
    if labels.k() != config.k || config.k < 2 {
        return Err(Error::Config(format!("logit chain needs K >= 2 matching the labels (K = {})", config.k)));
    }
    let mut rng = RngStream::new(config.seed, config.stream);
    let (n, p, k) = (x.nrows(), x.ncols(), config.k);
    let mut state = ChainState {
        labels: labels.clone(),
        beta: GatingCoefficients::zeros(k, p),
        prior_state: config.prior.initial_state(k, p),
        omega: DMatrix::from_element(n, k - 1, 0.25),
        components: None,
    };
    let snap_at = snapshot_schedule(config.n_save, config.snapshot_count, &mut rng);
    let mut store = DrawsStore::new(config.clone(), n, p, 0);
    store.store_labels = false;
    let total = config.n_burn + config.n_save * config.thin;
    let started = std::time::Instant::now();
    let mut saved = 0;
    for it in 0..total {
        let conds = sweep_gating(&mut state, x, config, &mut rng, &mut store.stats)?;
        let keep = it >= config.n_burn && (it - config.n_burn + 1) % config.thin == 0;
        if keep {
            if snap_at[saved] {
                store.snapshots.push(ImportanceSnapshot::new(
                    conds.iter().map(|c| c.mean.clone()).collect(),
                    conds.iter().map(|c| c.prec_chol.clone()).collect(),
                    p,
                    None,
                )?);
                store.snapshot_iters.push(saved);
            }
            store.push(&state, (0..k).collect());
            saved += 1;
        }
    }
    store.stats.runtime_sec = started.elapsed().as_secs_f64();
    Ok(store)
}

/// Posterior mean of λ_k per group from NG draws (None for other priors).
pub fn posterior_mean_lambda(store: &DrawsStore) -> Option<DVector<f64>> {
    let mut acc: Option<DVector<f64>> = None;
    for s in &store.prior_states {
        match s {
            PriorState::Ng(ng) => {
                acc = Some(match acc {
                    Some(a) => a + &ng.lambda,
                    None => ng.lambda.clone(),
                })
            }
            _ => return None,
        }
    }
    acc.map(|a| a / store.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = ChainConfig::default();
        assert!(c.validate().is_ok());
        c.snapshot_count = c.n_save + 1;
        assert!(c.validate().is_err());
        let c = ChainConfig { thin: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    fn toy_state() -> ChainState {
        let beta = GatingCoefficients::new(DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.3])).unwrap();
        let mut b = BernoulliComponent::uniform(3, 1);
        b.gamma = DMatrix::from_column_slice(3, 1, &[0.1, 0.5, 0.9]);
        ChainState {
            labels: LabelVector::new(vec![0, 1, 2, 2], 3).unwrap(),
            beta,
            prior_state: PriorState::Ng(crate::model::NgState {
                tau2: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
                lambda: DVector::from_vec(vec![0.5, 1.5]),
            }),
            omega: DMatrix::from_element(4, 2, 0.25),
            components: Some(Components::Bernoulli(b)),
        }
    }

    #[test]
    fn permutation_and_inverse_restore_state() {
        let s = toy_state();
        assert_eq!(s.permuted(&[0, 1, 2]), s);
        for perm in [[2usize, 0, 1], [1, 0, 2], [0, 2, 1], [2, 1, 0]] {
            let mut inv = [0; 3];
            for (j, &p) in perm.iter().enumerate() {
                inv[p] = j;
            }
            let back = s.permuted(&perm).permuted(&inv);
            assert_eq!(back.labels, s.labels);
            assert_eq!(back.components, s.components);
            assert_eq!(back.prior_state, s.prior_state);
            for (a, b) in back.beta.matrix().iter().zip(s.beta.matrix().iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn permutation_keeps_probability_multiset() {
        let s = toy_state();
        let x = [1.0, -0.4];
        let p = crate::model::gating_probs(&x, &s.beta).unwrap();
        let mut rng = RngStream::new(4, 0);
        for _ in 0..10 {
            let mut t = s.clone();
            let perm = permute_step(&mut t, &mut rng);
            let q = crate::model::gating_probs(&x, &t.beta).unwrap();
            for j in 0..3 {
                assert!((q[j] - p[perm[j]]).abs() < 1e-14);
            }
            let (a, b) = (&s.components, &t.components);
            if let (Some(Components::Bernoulli(a)), Some(Components::Bernoulli(b))) = (a, b) {
                for j in 0..3 {
                    assert_eq!(b.gamma[(j, 0)], a.gamma[(perm[j], 0)]);
                }
            }
        }
    }
}
