//! Ex-post identification of randomly permuted draws by k-means clustering
//! of the point-process representation.

mod kmeans;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, KMeansFit};

use crate::error::{Error, Result};
use crate::gibbs::{DrawsStore, RelabelManifest};
use crate::model::{Components, Family, LabelVector};
use crate::randkit::RngStream;

/// Non-permutation rates above this suggest an over-fitting model.
pub const NONPERM_WARN: f64 = 0.05;
pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_MAX_ITER: usize = 300;

/// Which component parameters enter the clustering.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum ParamSelector {
    /// All γ for Bernoulli components, the means for Gaussian ones.
    #[default]
    Default,
    /// Explicit feature names such as `gamma_2` or `mu_1`.
    Columns(Vec<String>),
}

impl ParamSelector {
    fn resolve(&self, comps: &Components) -> Result<Vec<usize>> {
        let names = comps.feature_names();
        match self {
            ParamSelector::Default => Ok(match comps.family() {
                Family::Bernoulli => (0..names.len()).collect(),
                Family::Gaussian => (0..comps.dim()).collect(),
            }),
            ParamSelector::Columns(cols) => {
                if cols.is_empty() {
                    return Err(Error::Config("empty parameter selection".into()));
                }
                cols.iter()
                    .map(|c| {
                        names.iter().position(|n| n == c).ok_or_else(|| {
                            Error::Config(format!("unknown identification parameter '{c}' (available: {})", names.join(", ")))
                        })
                    })
                    .collect()
            }
        }
    }
}

/// M·K points, one per (draw, component slot), draw-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointProcessMatrix {
    pub points: DMatrix<f64>,
    pub columns: Vec<String>,
    pub draws: usize,
    pub k: usize,
}

impl PointProcessMatrix {
    /// Provenance of row `r`: (draw index, component slot).
    pub fn provenance(&self, r: usize) -> (usize, usize) {
        (r / self.k, r % self.k)
    }
}

/// Stack the selected per-component parameters of every draw and
/// standardize each column; constant columns are dropped.
pub fn build_point_process(draws: &DrawsStore, selector: &ParamSelector) -> Result<PointProcessMatrix> {
    let first = draws.components.first().ok_or_else(|| Error::Empty("no component draws to identify".into()))?;
    let cols = selector.resolve(first)?;
    let names = first.feature_names();
    let (m, k) = (draws.components.len(), draws.k());
    let mut raw = DMatrix::zeros(m * k, cols.len());
    for (d, comps) in draws.components.iter().enumerate() {
        for slot in 0..k {
            let f = comps.features(slot);
            for (c, &idx) in cols.iter().enumerate() {
                raw[(d * k + slot, c)] = f[idx];
            }
        }
    }
    standardize(raw, cols.iter().map(|&i| names[i].clone()).collect(), m, k)
}

pub(crate) fn standardize(raw: DMatrix<f64>, names: Vec<String>, draws: usize, k: usize) -> Result<PointProcessMatrix> {
    let rows = raw.nrows();
    let mut keep = Vec::new();
    let mut kept_names = Vec::new();
    for (c, name) in names.into_iter().enumerate() {
        let col = raw.column(c);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
        if var > 0.0 && var.is_finite() {
            let sd = var.sqrt();
            keep.push(col.map(|v| (v - mean) / sd));
            kept_names.push(name);
        } else {
            warn!("identification column '{name}' is constant and was dropped");
        }
    }
    if keep.is_empty() {
        return Err(Error::Validation("all identification columns are constant".into()));
    }
    Ok(PointProcessMatrix { points: DMatrix::from_columns(&keep), columns: kept_names, draws, k })
}

/// Outcome of clustering the point process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelabelResult {
    /// For each retained draw, ρ[slot] = cluster of that component slot.
    pub permutations: Vec<Vec<usize>>,
    pub retained: Vec<usize>,
    pub nonperm_rate: f64,
    pub centers: Vec<Vec<f64>>,
}

fn is_permutation(v: &[usize]) -> bool {
    let mut seen = vec![false; v.len()];
    for &x in v {
        if x >= v.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// Cluster the M·K points into K groups; draws whose K slots do not fall
/// into K distinct clusters are removed.
pub fn kmeans_relabel(pp: &PointProcessMatrix, k: usize, rng: &mut RngStream) -> Result<RelabelResult> {
    if pp.k != k {
        return Err(Error::dim(format!("point process built for K = {}, asked for {k}", pp.k)));
    }
    if pp.points.nrows() < k {
        return Err(Error::KMeans("fewer points than clusters".into()));
    }
    let fit = kmeans(&pp.points, k, KMEANS_RESTARTS, KMEANS_MAX_ITER, rng)?;
    let mut permutations = Vec::new();
    let mut retained = Vec::new();
    for m in 0..pp.draws {
        let rho = &fit.assignments[m * k..(m + 1) * k];
        if is_permutation(rho) {
            permutations.push(rho.to_vec());
            retained.push(m);
        }
    }
    let nonperm_rate = 1.0 - retained.len() as f64 / pp.draws as f64;
    if nonperm_rate > NONPERM_WARN {
        warn!("non-permutation rate {nonperm_rate:.3} exceeds {NONPERM_WARN}: clusters overlap, the model may be over-fitting");
    }
    let centers = fit.centers.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(RelabelResult { permutations, retained, nonperm_rate, centers })
}

fn inverse(rho: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; rho.len()];
    for (slot, &c) in rho.iter().enumerate() {
        inv[c] = slot;
    }
    inv
}

/// Reorder every retained draw so that component slot k becomes label ρ[k]
/// in all parameter blocks; removed draws are dropped.
pub fn apply_relabeling(draws: &DrawsStore, result: &RelabelResult) -> Result<DrawsStore> {
    if result.retained.len() != result.permutations.len() {
        return Err(Error::dim("retained indices and permutations differ in length"));
    }
    let mut out = DrawsStore::new(draws.config.clone(), draws.n, draws.p, draws.j);
    out.store_labels = draws.store_labels;
    out.snapshots = draws.snapshots.clone();
    out.snapshot_iters = draws.snapshot_iters.clone();
    out.stats = draws.stats.clone();
    for (&m, rho) in result.retained.iter().zip(&result.permutations) {
        if m >= draws.len() || rho.len() != draws.k() || !is_permutation(rho) {
            return Err(Error::Validation(format!("relabeling entry for draw {m} does not fit the draws")));
        }
        let perm = inverse(rho);
        out.beta.push(draws.beta[m].relabeled(&perm));
        out.prior_states.push(draws.prior_states[m].relabeled(&perm));
        if let Some(c) = draws.components.get(m) {
            out.components.push(c.relabeled(&perm));
        }
        if draws.store_labels {
            let l = LabelVector::new(draws.labels[m].iter().map(|&s| s as usize).collect(), draws.k())?;
            out.labels.push(l.relabeled(&perm).as_slice().iter().map(|&s| s as u16).collect());
        }
        out.permutations.push(draws.permutations[m].clone());
    }
    out.relabeling = Some(RelabelManifest {
        retained: result.retained.clone(),
        permutations: result.permutations.clone(),
        nonperm_rate: result.nonperm_rate,
    });
    Ok(out)
}

/// Build the point process, cluster it and relabel in one call.
pub fn identify(draws: &DrawsStore, selector: &ParamSelector, rng: &mut RngStream) -> Result<(DrawsStore, RelabelResult)> {
    if draws.k() == 1 {
        let result = RelabelResult {
            permutations: vec![vec![0]; draws.len()],
            retained: (0..draws.len()).collect(),
            nonperm_rate: 0.0,
            centers: Vec::new(),
        };
        return Ok((apply_relabeling(draws, &result)?, result));
    }
    let pp = build_point_process(draws, selector)?;
    let result = kmeans_relabel(&pp, draws.k(), rng)?;
    Ok((apply_relabeling(draws, &result)?, result))
}
