use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ChainConfig, ChainState};
use crate::error::{Error, Result};
use crate::marglik::ImportanceSnapshot;
use crate::model::data::format_f64;
use crate::model::{Components, GatingCoefficients, GatingPrior, LabelVector, NgState, PriorState, SsvsState};

/// Diagnostics collected while sampling.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// Precision matrices that needed the diagonal jitter.
    pub jitter_retries: usize,
    /// Sweep-component pairs in which a component had no members.
    pub empty_components: usize,
    pub runtime_sec: f64,
}

/// Ex-post relabeling applied to a store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelabelManifest {
    /// Indices (into the original saved sequence) of the retained draws.
    pub retained: Vec<usize>,
    pub permutations: Vec<Vec<usize>>,
    pub nonperm_rate: f64,
}

/// Saved draws of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawsStore {
    pub config: ChainConfig,
    pub n: usize,
    pub p: usize,
    pub j: usize,
    pub beta: Vec<GatingCoefficients>,
    pub prior_states: Vec<PriorState>,
    pub components: Vec<Components>,
    /// 0-based labels per draw (empty when `store_labels` is false).
    pub labels: Vec<Vec<u16>>,
    pub store_labels: bool,
    /// Permutation applied at the end of each saved sweep.
    pub permutations: Vec<Vec<usize>>,
    pub snapshots: Vec<ImportanceSnapshot>,
    pub snapshot_iters: Vec<usize>,
    pub stats: RunStats,
    pub relabeling: Option<RelabelManifest>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    config: ChainConfig,
    k: usize,
    n: usize,
    p: usize,
    j: usize,
    draws: usize,
    store_labels: bool,
    component_template: Option<Components>,
    snapshot_iters: Vec<usize>,
    snapshots: Vec<ImportanceSnapshot>,
    stats: RunStats,
    relabeling: Option<RelabelManifest>,
}

/// Marginal posterior summary of one parameter column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

const FORMAT: &str = "ngmoe-draws-1";

impl DrawsStore {
    pub fn new(config: ChainConfig, n: usize, p: usize, j: usize) -> Self {
        Self {
            config,
            n,
            p,
            j,
            beta: Vec::new(),
            prior_states: Vec::new(),
            components: Vec::new(),
            labels: Vec::new(),
            store_labels: true,
            permutations: Vec::new(),
            snapshots: Vec::new(),
            snapshot_iters: Vec::new(),
            stats: RunStats::default(),
            relabeling: None,
        }
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub(crate) fn push(&mut self, state: &ChainState, perm: Vec<usize>) {
        self.beta.push(state.beta.clone());
        self.prior_states.push(state.prior_state.clone());
        if let Some(c) = &state.components {
            self.components.push(c.clone());
        }
        if self.store_labels {
            self.labels.push(state.labels.as_slice().iter().map(|&s| s as u16).collect());
        }
        self.permutations.push(perm);
    }

    pub fn label_vector(&self, m: usize) -> Result<LabelVector> {
        LabelVector::new(self.labels[m].iter().map(|&s| s as usize).collect(), self.k())
    }

    /// Posterior mean of the gating coefficients.
    pub fn mean_beta(&self) -> Result<GatingCoefficients> {
        if self.is_empty() {
            return Err(Error::Empty("no draws".into()));
        }
        let mut acc = DMatrix::zeros(self.k() - 1, self.p);
        for b in &self.beta {
            acc += b.matrix();
        }
        GatingCoefficients::new(acc / self.len() as f64)
    }

    /// Per-draw, per-observation MAP-style label frequencies: N×K matrix of
    /// the share of draws assigning each observation to each class.
    pub fn label_frequencies(&self) -> Result<DMatrix<f64>> {
        if self.labels.is_empty() {
            return Err(Error::Empty("no stored labels".into()));
        }
        let mut f = DMatrix::zeros(self.n, self.k());
        for draw in &self.labels {
            for (i, &s) in draw.iter().enumerate() {
                f[(i, s as usize)] += 1.0;
            }
        }
        Ok(f / self.labels.len() as f64)
    }

    /// Column names of the draws CSV, matching [`Self::draw_row`].
    pub fn column_names(&self) -> Vec<String> {
        let k = self.k();
        let mut names = vec!["draw".to_string()];
        names.extend((1..=k).map(|j| format!("perm_{j}")));
        for g in 1..k {
            names.extend((1..=self.p).map(|c| format!("beta_{g}_{c}")));
        }
        match self.config.prior {
            GatingPrior::Ng(_) => {
                names.extend((1..k).map(|g| format!("lambda_{g}")));
                for g in 1..k {
                    names.extend((1..=self.p).map(|c| format!("tau2_{g}_{c}")));
                }
            }
            GatingPrior::Ssvs(_) => {
                for g in 1..k {
                    names.extend((1..=self.p).map(|c| format!("delta_{g}_{c}")));
                }
            }
            GatingPrior::Flat(_) => {}
        }
        if let Some(c) = self.components.first() {
            for g in 1..=k {
                names.extend(c.feature_names().into_iter().map(|f| format!("{f}_{g}")));
            }
        }
        names
    }

    /// Values of draw `m` in the order of [`Self::column_names`].
    pub fn draw_row(&self, m: usize) -> Vec<f64> {
        let k = self.k();
        let mut row = vec![m as f64];
        row.extend(self.permutations[m].iter().map(|&p| (p + 1) as f64));
        row.extend(self.beta[m].matrix().transpose().iter());
        match &self.prior_states[m] {
            PriorState::Ng(s) => {
                row.extend(s.lambda.iter());
                row.extend(s.tau2.transpose().iter());
            }
            PriorState::Ssvs(s) => row.extend(s.delta.transpose().iter().map(|&d| d as f64)),
            PriorState::Flat => {}
        }
        if let Some(c) = self.components.get(m) {
            for g in 0..k {
                row.extend(c.features(g));
            }
        }
        row
    }

    /// Posterior mean, SD and 2.5/50/97.5% quantiles of every stored
    /// parameter column (draw index and permutation columns excluded).
    pub fn summarize(&self) -> Result<Vec<ParamSummary>> {
        if self.is_empty() {
            return Err(Error::Empty("no draws to summarize".into()));
        }
        let names = self.column_names();
        let skip = 1 + self.k();
        let rows: Vec<Vec<f64>> = (0..self.len()).map(|m| self.draw_row(m)).collect();
        Ok(names
            .into_iter()
            .enumerate()
            .skip(skip)
            .map(|(c, name)| {
                let mut v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let sd = if v.len() > 1 {
                    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                v.sort_by(f64::total_cmp);
                ParamSummary { name, mean, sd, q025: quantile(&v, 0.025), q500: quantile(&v, 0.5), q975: quantile(&v, 0.975) }
            })
            .collect())
    }

    /// Write `draws.csv`, `labels.csv` (if labels are stored) and
    /// `draws_manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("draws.csv"))?;
        w.write_record(self.column_names())?;
        for m in 0..self.len() {
            w.write_record(self.draw_row(m).into_iter().map(format_f64))?;
        }
        w.flush()?;
        if self.store_labels {
            let mut w = csv::Writer::from_path(dir.join("labels.csv"))?;
            w.write_record((1..=self.n).map(|i| format!("s_{i}")))?;
            for draw in &self.labels {
                w.write_record(draw.iter().map(|s| (s + 1).to_string()))?;
            }
            w.flush()?;
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            config: self.config.clone(),
            k: self.k(),
            n: self.n,
            p: self.p,
            j: self.j,
            draws: self.len(),
            store_labels: self.store_labels,
            component_template: self.components.first().cloned(),
            snapshot_iters: self.snapshot_iters.clone(),
            snapshots: self.snapshots.clone(),
            stats: self.stats.clone(),
            relabeling: self.relabeling.clone(),
        };
        fs::write(dir.join("draws_manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("draws_manifest.json"))?)?;
        if manifest.format != FORMAT {
            return Err(Error::Validation(format!("unknown draws format '{}'", manifest.format)));
        }
        let mut store = DrawsStore::new(manifest.config, manifest.n, manifest.p, manifest.j);
        store.store_labels = manifest.store_labels;
        store.snapshots = manifest.snapshots;
        store.snapshot_iters = manifest.snapshot_iters;
        store.stats = manifest.stats;
        store.relabeling = manifest.relabeling;
        if let Some(t) = &manifest.component_template {
            store.components.push(t.clone());
        }
        let expected = store.column_names();
        store.components.clear();
        let (k, p) = (manifest.k, manifest.p);
        let mut r = csv::Reader::from_path(dir.join("draws.csv"))?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header != expected {
            return Err(Error::Validation("draws.csv header does not match the manifest".into()));
        }
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    s.parse::<f64>().map_err(|_| {
                        Error::Validation(format!("draws.csv row {} column '{}': not a number", line + 2, header[c]))
                    })
                })
                .collect::<Result<_>>()?;
            let mut it = v.into_iter().skip(1);
            let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
            store.permutations.push(take(k).into_iter().map(|x| x as usize - 1).collect());
            store.beta.push(GatingCoefficients::new(DMatrix::from_row_slice(k - 1, p, &take((k - 1) * p)))?);
            store.prior_states.push(match store.config.prior {
                GatingPrior::Ng(_) => {
                    let lambda = DVector::from_vec(take(k - 1));
                    let tau2 = DMatrix::from_row_slice(k - 1, p, &take((k - 1) * p));
                    PriorState::Ng(NgState { tau2, lambda })
                }
                GatingPrior::Ssvs(_) => PriorState::Ssvs(SsvsState {
                    delta: DMatrix::from_row_slice(k - 1, p, &take((k - 1) * p).iter().map(|&d| d as u8).collect::<Vec<_>>()),
                }),
                GatingPrior::Flat(_) => PriorState::Flat,
            });
            if let Some(t) = &manifest.component_template {
                let width = t.features(0).len();
                let feats = take(k * width);
                store.components.push(components_from_features(t, &feats, k)?);
            }
        }
        if store.beta.len() != manifest.draws {
            return Err(Error::Validation(format!(
                "manifest lists {} draws, draws.csv has {}",
                manifest.draws,
                store.beta.len()
            )));
        }
        if store.store_labels {
            let mut r = csv::Reader::from_path(dir.join("labels.csv"))?;
            for (line, rec) in r.records().enumerate() {
                let rec = rec?;
                let row = rec
                    .iter()
                    .map(|s| match s.parse::<u16>() {
                        Ok(v) if v >= 1 && (v as usize) <= k => Ok(v - 1),
                        _ => Err(Error::Validation(format!("labels.csv row {}: bad label '{s}'", line + 2))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                store.labels.push(row);
            }
        }
        Ok(store)
    }
}

fn components_from_features(template: &Components, feats: &[f64], k: usize) -> Result<Components> {
    let width = feats.len() / k;
    Ok(match template {
        Components::Bernoulli(b) => {
            let mut b = b.clone();
            b.gamma = DMatrix::from_row_slice(k, width, feats);
            Components::Bernoulli(b)
        }
        Components::Gaussian(g) => {
            let d = g.mu.ncols();
            let mut g = g.clone();
            g.mu = DMatrix::zeros(k, d);
            g.sigma.clear();
            for c in 0..k {
                let f = &feats[c * width..(c + 1) * width];
                g.mu.set_row(c, &DVector::from_column_slice(&f[..d]).transpose());
                let mut s = DMatrix::zeros(d, d);
                let mut idx = d;
                for r in 0..d {
                    for col in r..d {
                        s[(r, col)] = f[idx];
                        s[(col, r)] = f[idx];
                        idx += 1;
                    }
                }
                g.sigma.push(s);
            }
            Components::Gaussian(g)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.975) - 4.9).abs() < 1e-12);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }
}
