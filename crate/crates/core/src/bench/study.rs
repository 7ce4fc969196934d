//! Replicated prior comparisons for the two simulation studies.

use std::path::Path;
use std::str::FromStr;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gen::{gen_study1, gen_study2, Scenario, Study1Design, Study2Design, STUDY_K};
use super::metrics::{compute_metrics_logit, compute_metrics_moe, MetricsReport};
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, run_logit_chain, ChainConfig};
use crate::ident::{identify, ParamSelector};
use crate::marglik::{marglik_for_k, BridgeSettings};
use crate::model::{Family, FlatHyper, GatingPrior, NgHyper, SsvsHyper};
use crate::randkit::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Flat,
    Ssvs,
    Ng,
}

impl PriorKind {
    pub const ALL: [PriorKind; 3] = [PriorKind::Flat, PriorKind::Ssvs, PriorKind::Ng];

    pub fn name(&self) -> &'static str {
        match self {
            PriorKind::Flat => "standard",
            PriorKind::Ssvs => "ssvs",
            PriorKind::Ng => "ng",
        }
    }

    pub fn gating_prior(&self, theta: f64) -> GatingPrior {
        match self {
            PriorKind::Flat => GatingPrior::Flat(FlatHyper::default()),
            PriorKind::Ssvs => GatingPrior::Ssvs(SsvsHyper::default()),
            PriorKind::Ng => GatingPrior::Ng(NgHyper { theta, ..NgHyper::default() }),
        }
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flat" | "standard" => Ok(PriorKind::Flat),
            "ssvs" => Ok(PriorKind::Ssvs),
            "ng" | "normal-gamma" => Ok(PriorKind::Ng),
            other => Err(Error::Config(format!("unknown prior '{other}' (expected flat, ssvs or ng)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "lowercase")]
pub enum StudyKind {
    Logit { n_obs: usize },
    Moe { scenario: Scenario },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub kind: StudyKind,
    pub reps: usize,
    pub priors: Vec<PriorKind>,
    pub n_burn: usize,
    pub n_save: usize,
    pub snapshot_count: usize,
    pub theta: f64,
    pub seed: u64,
    /// K values for the Bayes-factor comparison (mixture study only).
    pub bf_k_range: Option<Vec<usize>>,
}

impl StudySpec {
    pub fn new(kind: StudyKind) -> Self {
        Self {
            kind,
            reps: 5,
            priors: PriorKind::ALL.to_vec(),
            n_burn: 1000,
            n_save: 5000,
            snapshot_count: 100,
            theta: 0.1,
            seed: 1,
            bf_k_range: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub prior: PriorKind,
    pub metrics: MetricsReport,
    pub nonperm_rate: f64,
    /// (K, log ML) pairs when a Bayes-factor run was requested.
    pub log_ml: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggRow {
    pub prior: PriorKind,
    pub mean: MetricsReport,
    pub nonperm_rate: f64,
    /// RMSEs divided by those of the reference prior.
    pub rel_rmse_zeros: f64,
    pub rel_rmse_nonzeros: f64,
    pub rel_rmse_overall: f64,
    pub rel_rmse_pp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfRow {
    pub prior: PriorKind,
    pub k: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOutput {
    pub spec: StudySpec,
    /// Prior the relative RMSEs are computed against (NG when present).
    pub reference: PriorKind,
    pub reps: Vec<RepRow>,
    pub aggregate: Vec<AggRow>,
    pub log_bf: Vec<BfRow>,
}

/// Reference K of the Bayes-factor comparison.
pub const BF_REFERENCE_K: usize = STUDY_K;

fn run_one(spec: &StudySpec, rep: usize, pi: usize, prior: PriorKind) -> Result<RepRow> {
    let root = RngStream::new(spec.seed, 0);
    let mut data_rng = root.derive(rep as u64);
    let chain_stream = root.derive(1_000_000 + (rep * 16 + pi) as u64).stream_id();
    let base = ChainConfig {
        k: STUDY_K,
        n_burn: spec.n_burn,
        n_save: spec.n_save,
        thin: 1,
        prior: prior.gating_prior(spec.theta),
        snapshot_count: spec.snapshot_count.min(spec.n_save),
        seed: spec.seed,
        stream: chain_stream,
        ..ChainConfig::default()
    };
    match spec.kind {
        StudyKind::Logit { n_obs } => {
            let truth = gen_study1(&Study1Design { n_obs }, &mut data_rng)?;
            let cfg = ChainConfig { permute: false, ..base };
            let draws = run_logit_chain(&cfg, &truth.x, &truth.labels)?;
            let metrics = compute_metrics_logit(&truth, &draws)?;
            Ok(RepRow { rep, prior, metrics, nonperm_rate: 0.0, log_ml: Vec::new() })
        }
        StudyKind::Moe { scenario } => {
            let truth = gen_study2(&Study2Design::new(scenario), &mut data_rng)?;
            let cfg = ChainConfig { family: Family::Gaussian, ..base };
            let draws = run_chain(&cfg, &truth.data)?;
            let mut id_rng = root.derive(2_000_000 + (rep * 16 + pi) as u64);
            let (identified, relabel) = identify(&draws, &ParamSelector::Default, &mut id_rng)?;
            let metrics = compute_metrics_moe(&truth, &identified)?;
            let mut log_ml = Vec::new();
            if let Some(ks) = &spec.bf_k_range {
                let bf_cfg = ChainConfig { stream: root.derive(3_000_000 + (rep * 16 + pi) as u64).stream_id(), ..cfg };
                for (row, _) in marglik_for_k(&truth.data, &bf_cfg, ks, BF_REFERENCE_K, None, BridgeSettings::default())? {
                    log_ml.push((row.k, row.log_ml));
                }
            }
            Ok(RepRow { rep, prior, metrics, nonperm_rate: relabel.nonperm_rate, log_ml })
        }
    }
}

fn mean_report(rows: &[&RepRow]) -> MetricsReport {
    let n = rows.len() as f64;
    let avg = |f: &dyn Fn(&MetricsReport) -> f64| rows.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    MetricsReport {
        rmse_zeros: avg(&|m| m.rmse_zeros),
        rmse_nonzeros: avg(&|m| m.rmse_nonzeros),
        rmse_overall: avg(&|m| m.rmse_overall),
        rmse_pp: avg(&|m| m.rmse_pp),
        miscl_rate: avg(&|m| m.miscl_rate),
        runtime_sec: avg(&|m| m.runtime_sec),
        n_zeros: rows[0].metrics.n_zeros,
        n_nonzeros: rows[0].metrics.n_nonzeros,
    }
}

/// Run all replications for all priors (in parallel) and aggregate.
pub fn run_study(spec: &StudySpec) -> Result<StudyOutput> {
    if spec.reps == 0 {
        return Err(Error::Empty("study needs at least one replication".into()));
    }
    if spec.priors.is_empty() {
        return Err(Error::Empty("study needs at least one prior".into()));
    }
    if let Some(ks) = &spec.bf_k_range {
        if matches!(spec.kind, StudyKind::Logit { .. }) {
            return Err(Error::Config("Bayes factors are only available for the mixture study".into()));
        }
        if !ks.contains(&BF_REFERENCE_K) {
            return Err(Error::Config(format!("K range must contain the reference K = {BF_REFERENCE_K}")));
        }
    }
    let jobs: Vec<(usize, usize, PriorKind)> =
        (0..spec.reps).flat_map(|r| spec.priors.iter().enumerate().map(move |(i, p)| (r, i, *p))).collect();
    info!("study: {} jobs", jobs.len());
    let mut reps = jobs.par_iter().map(|&(r, i, p)| run_one(spec, r, i, p)).collect::<Result<Vec<_>>>()?;
    reps.sort_by_key(|r| (r.prior as u8, r.rep));
    let reference = if spec.priors.contains(&PriorKind::Ng) { PriorKind::Ng } else { spec.priors[0] };
    let mut aggregate = Vec::new();
    for prior in &spec.priors {
        let rows: Vec<&RepRow> = reps.iter().filter(|r| r.prior == *prior).collect();
        let mean = mean_report(&rows);
        let nonperm_rate = rows.iter().map(|r| r.nonperm_rate).sum::<f64>() / rows.len() as f64;
        aggregate.push(AggRow {
            prior: *prior,
            mean,
            nonperm_rate,
            rel_rmse_zeros: 0.0,
            rel_rmse_nonzeros: 0.0,
            rel_rmse_overall: 0.0,
            rel_rmse_pp: 0.0,
        });
    }
    let base = aggregate.iter().find(|a| a.prior == reference).map(|a| a.mean.clone()).expect("reference present");
    for a in &mut aggregate {
        a.rel_rmse_zeros = ratio(a.mean.rmse_zeros, base.rmse_zeros);
        a.rel_rmse_nonzeros = ratio(a.mean.rmse_nonzeros, base.rmse_nonzeros);
        a.rel_rmse_overall = ratio(a.mean.rmse_overall, base.rmse_overall);
        a.rel_rmse_pp = ratio(a.mean.rmse_pp, base.rmse_pp);
    }
    let mut log_bf = Vec::new();
    if let Some(ks) = &spec.bf_k_range {
        for prior in &spec.priors {
            for &k in ks {
                let vals: Vec<f64> = reps
                    .iter()
                    .filter(|r| r.prior == *prior)
                    .map(|r| {
                        let get = |kk: usize| r.log_ml.iter().find(|(x, _)| *x == kk).map(|(_, v)| *v).unwrap_or(f64::NAN);
                        get(k) - get(BF_REFERENCE_K)
                    })
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let sd = if vals.len() > 1 {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                log_bf.push(BfRow { prior: *prior, k, mean, sd });
            }
        }
    }
    Ok(StudyOutput { spec: spec.clone(), reference, reps, aggregate, log_bf })
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

impl StudyOutput {
    /// Writes `replications.csv`, `aggregate.csv` and, when present,
    /// `log_bf.csv` (K, mean, sd per prior).
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("replications.csv"))?;
        w.write_record([
            "rep", "prior", "rmse_zeros", "rmse_nonzeros", "rmse_overall", "rmse_pp", "miscl", "nonperm_rate", "time_sec",
        ])?;
        for r in &self.reps {
            let m = &r.metrics;
            w.write_record([
                r.rep.to_string(),
                r.prior.name().to_string(),
                m.rmse_zeros.to_string(),
                m.rmse_nonzeros.to_string(),
                m.rmse_overall.to_string(),
                m.rmse_pp.to_string(),
                m.miscl_rate.to_string(),
                r.nonperm_rate.to_string(),
                m.runtime_sec.to_string(),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("aggregate.csv"))?;
        w.write_record([
            "prior", "rmse_zeros", "rmse_nonzeros", "rmse_overall", "rmse_pp", "miscl", "time_sec",
            "rmse_zeros_abs", "rmse_nonzeros_abs", "rmse_overall_abs", "rmse_pp_abs", "nonperm_rate",
        ])?;
        for a in &self.aggregate {
            let m = &a.mean;
            w.write_record([
                a.prior.name().to_string(),
                a.rel_rmse_zeros.to_string(),
                a.rel_rmse_nonzeros.to_string(),
                a.rel_rmse_overall.to_string(),
                a.rel_rmse_pp.to_string(),
                m.miscl_rate.to_string(),
                m.runtime_sec.to_string(),
                m.rmse_zeros.to_string(),
                m.rmse_nonzeros.to_string(),
                m.rmse_overall.to_string(),
                m.rmse_pp.to_string(),
                a.nonperm_rate.to_string(),
            ])?;
        }
        w.flush()?;
        if !self.log_bf.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("log_bf.csv"))?;
            w.write_record(["prior", "k", "mean_log_bf", "sd_log_bf"])?;
            for b in &self.log_bf {
                w.write_record([b.prior.name().to_string(), b.k.to_string(), b.mean.to_string(), b.sd.to_string()])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}
