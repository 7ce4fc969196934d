//! Accuracy metrics for fitted gating coefficients and classifications.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::gen::{LogitData, MoeData};
use crate::error::{Error, Result};
use crate::gibbs::DrawsStore;
use crate::model::{Components, GatingCoefficients};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_zeros: f64,
    pub rmse_nonzeros: f64,
    pub rmse_overall: f64,
    pub rmse_pp: f64,
    pub miscl_rate: f64,
    pub runtime_sec: f64,
    pub n_zeros: usize,
    pub n_nonzeros: usize,
}

/// RMSE of `est` against `truth`, split by whether the true entry is zero.
/// Returns (zeros, nonzeros, overall, count zeros, count nonzeros).
pub fn beta_rmse(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<(f64, f64, f64, usize, usize)> {
    if est.shape() != truth.shape() {
        return Err(Error::dim(format!("estimate is {:?}, truth is {:?}", est.shape(), truth.shape())));
    }
    let (mut s0, mut s1, mut n0, mut n1) = (0.0, 0.0, 0usize, 0usize);
    for (e, t) in est.iter().zip(truth.iter()) {
        let d = (e - t).powi(2);
        if *t == 0.0 {
            s0 += d;
            n0 += 1;
        } else {
            s1 += d;
            n1 += 1;
        }
    }
    let r = |s: f64, n: usize| if n == 0 { 0.0 } else { (s / n as f64).sqrt() };
    Ok((r(s0, n0), r(s1, n1), r(s0 + s1, n0 + n1), n0, n1))
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Best relabeling of estimated labels onto true ones by exhaustive search
/// over all K! assignments: true label t is matched with estimated label
/// perm[t]. Returns (perm, misclassification rate).
pub fn match_labels(est: &[usize], truth: &[usize], k: usize) -> Result<(Vec<usize>, f64)> {
    if est.len() != truth.len() || est.is_empty() {
        return Err(Error::dim("label vectors must be non-empty and of equal length"));
    }
    if k > 8 {
        return Err(Error::Config("exhaustive label matching supports K <= 8".into()));
    }
    let mut conf = vec![vec![0usize; k]; k];
    for (&e, &t) in est.iter().zip(truth) {
        if e >= k || t >= k {
            return Err(Error::domain("label outside 1..K"));
        }
        conf[e][t] += 1;
    }
    let (mut best, mut best_hits) = ((0..k).collect::<Vec<_>>(), 0usize);
    for p in permutations(k) {
        let hits = (0..k).map(|t| conf[p[t]][t]).sum::<usize>();
        if hits > best_hits {
            best_hits = hits;
            best = p;
        }
    }
    Ok((best, 1.0 - best_hits as f64 / est.len() as f64))
}

fn prob_rmse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Metrics for a logit-only fit with observed labels.
pub fn compute_metrics_logit(truth: &LogitData, draws: &DrawsStore) -> Result<MetricsReport> {
    let est = draws.mean_beta()?;
    let (z, nz, all, n0, n1) = beta_rmse(est.matrix(), &truth.beta)?;
    let pp = est.log_probs_matrix(&truth.x)?.map(f64::exp);
    Ok(MetricsReport {
        rmse_zeros: z,
        rmse_nonzeros: nz,
        rmse_overall: all,
        rmse_pp: prob_rmse(&pp, &truth.probs),
        miscl_rate: 0.0,
        runtime_sec: draws.stats.runtime_sec,
        n_zeros: n0,
        n_nonzeros: n1,
    })
}

/// Posterior means of all component parameters.
fn mean_components(draws: &DrawsStore) -> Result<Components> {
    let first = draws.components.first().ok_or_else(|| Error::Empty("no component draws".into()))?;
    let m = draws.components.len() as f64;
    Ok(match first {
        Components::Bernoulli(b) => {
            let mut b = b.clone();
            b.gamma = draws.components.iter().fold(DMatrix::zeros(b.gamma.nrows(), b.gamma.ncols()), |acc, c| match c {
                Components::Bernoulli(x) => acc + &x.gamma,
                _ => acc,
            }) / m;
            Components::Bernoulli(b)
        }
        Components::Gaussian(g) => {
            let mut g = g.clone();
            g.mu = draws.components.iter().fold(DMatrix::zeros(g.mu.nrows(), g.mu.ncols()), |acc, c| match c {
                Components::Gaussian(x) => acc + &x.mu,
                _ => acc,
            }) / m;
            for k in 0..g.sigma.len() {
                g.sigma[k] = draws.components.iter().fold(DMatrix::zeros(g.mu.ncols(), g.mu.ncols()), |acc, c| match c {
                    Components::Gaussian(x) => acc + &x.sigma[k],
                    _ => acc,
                }) / m;
            }
            Components::Gaussian(g)
        }
    })
}

/// Metrics for a mixture-of-experts fit from identified draws. Estimated
/// labels are the per-observation modal labels; estimated components are
/// matched to the true ones by minimum misclassification and the gating
/// coefficients are re-expressed under that matching.
pub fn compute_metrics_moe(truth: &MoeData, identified: &DrawsStore) -> Result<MetricsReport> {
    let k = identified.k();
    if truth.means.nrows() != k {
        return Err(Error::dim(format!("fitted K = {k}, true K = {}", truth.means.nrows())));
    }
    let freq = identified.label_frequencies()?;
    let map: Vec<usize> = (0..freq.nrows()).map(|i| freq.row(i).transpose().argmax().0).collect();
    let (perm, miscl) = match_labels(&map, truth.labels.as_slice(), k)?;
    let est: GatingCoefficients = identified.mean_beta()?.relabeled(&perm);
    let (z, nz, all, n0, n1) = beta_rmse(est.matrix(), &truth.beta)?;
    let comps = mean_components(identified)?.relabeled(&perm);
    let lf = comps.loglik_matrix(truth.data.responses())?;
    let lp = est.log_probs_matrix(truth.data.covariates())?;
    let mut pp = DMatrix::zeros(lf.nrows(), k);
    for i in 0..lf.nrows() {
        let w: Vec<f64> = (0..k).map(|c| lf[(i, c)] + lp[(i, c)]).collect();
        let lse = crate::marglik::logsumexp(&w)?;
        for c in 0..k {
            pp[(i, c)] = (w[c] - lse).exp();
        }
    }
    let true_pp = super::gen::true_membership(truth)?;
    Ok(MetricsReport {
        rmse_zeros: z,
        rmse_nonzeros: nz,
        rmse_overall: all,
        rmse_pp: prob_rmse(&pp, &true_pp),
        miscl_rate: miscl,
        runtime_sec: identified.stats.runtime_sec,
        n_zeros: n0,
        n_nonzeros: n1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_split_example() {
        let truth = DMatrix::from_fn(3, 20, |r, c| if c == 0 && r < 3 || (r == 0 && c == 1) { 1.0 } else { 0.0 });
        let est = truth.map(|t| if t != 0.0 { t + 0.1 } else { 0.0 });
        let (z, nz, all, n0, n1) = beta_rmse(&est, &truth).unwrap();
        assert_eq!((n0, n1), (56, 4));
        assert_eq!(z, 0.0);
        assert!((nz - 0.1).abs() < 1e-15);
        assert!((all.powi(2) * 60.0 - (z.powi(2) * 56.0 + nz.powi(2) * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn label_matching_absorbs_relabeling() {
        let truth = [0, 0, 1, 2, 2, 1];
        let est: Vec<usize> = truth.iter().map(|&t| [2, 0, 1][t]).collect();
        let (perm, m) = match_labels(&est, &truth, 3).unwrap();
        assert_eq!(m, 0.0);
        assert_eq!(perm, vec![2, 0, 1]);
        let (_, m) = match_labels(&[0, 0, 0, 1], &[0, 0, 1, 1], 2).unwrap();
        assert!((m - 0.25).abs() < 1e-15);
        assert_eq!(permutations(4).len(), 24);
    }
}
