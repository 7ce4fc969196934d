use std::path::Path;
use std::str::FromStr;

use log::info;
use ngmoe::bench::{gen_study1, gen_study2, run_study, PriorKind, Scenario, Study1Design, Study2Design, StudyKind, StudySpec};
use ngmoe::gibbs::{run_chain, ChainConfig, DrawsStore};
use ngmoe::ident::{identify, ParamSelector};
use ngmoe::marglik::{bridge_from_store, conjugate_bernoulli_log_ml, marglik_for_k, BridgeSettings};
use ngmoe::model::data::{read_matrix_csv, write_matrix_csv};
use ngmoe::model::{Dataset, Family, FlatHyper, GatingPrior, NgHyper, SsvsHyper};
use ngmoe::nalgebra::DMatrix;
use ngmoe::randkit::RngStream;

use crate::args::*;
use crate::error::{CliError, CliResult};

/// Files a command wrote, relative to its output directory.
pub type Outputs = Vec<String>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn f(v: f64) -> String {
    ngmoe::model::data::format_f64(v)
}

pub fn simulate(a: &SimulateArgs) -> CliResult<Outputs> {
    std::fs::create_dir_all(&a.out)?;
    let mut rng = RngStream::new(a.seed, 0);
    let names = |prefix: &str, n: usize| (1..=n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
    match a.study {
        1 => {
            if a.scenario.is_some() {
                return Err(usage("--scenario applies to study 2 only"));
            }
            let d = gen_study1(&Study1Design { n_obs: a.n }, &mut rng)?;
            let s = DMatrix::from_fn(a.n, 1, |i, _| (d.labels.as_slice()[i] + 1) as f64);
            write_matrix_csv(&a.out.join("responses.csv"), &["s".to_string()], &s)?;
            write_matrix_csv(&a.out.join("covariates.csv"), &names("x", d.x.ncols()), &d.x)?;
            write_matrix_csv(&a.out.join("truth.csv"), &names("x", d.beta.ncols()), &d.beta)?;
            Ok(vec!["responses.csv".into(), "covariates.csv".into(), "truth.csv".into()])
        }
        2 => {
            let sc = a.scenario.as_deref().ok_or_else(|| usage("study 2 needs --scenario"))?;
            let scenario = Scenario::from_str(sc).map_err(|e| usage(e.to_string()))?;
            let design = Study2Design { n_obs: a.n, ..Study2Design::new(scenario) };
            let d = gen_study2(&design, &mut rng)?;
            d.data.write_csv(&a.out.join("responses.csv"), &a.out.join("covariates.csv"))?;
            write_matrix_csv(&a.out.join("truth.csv"), d.data.covariate_names(), &d.beta)?;
            let s = DMatrix::from_fn(a.n, 1, |i, _| (d.labels.as_slice()[i] + 1) as f64);
            write_matrix_csv(&a.out.join("labels.csv"), &["s".to_string()], &s)?;
            Ok(vec!["responses.csv".into(), "covariates.csv".into(), "truth.csv".into(), "labels.csv".into()])
        }
        other => Err(usage(format!("unknown study {other} (expected 1 or 2)"))),
    }
}

fn load_data(m: &ModelArgs, family: Family) -> CliResult<Dataset> {
    let rp = m.responses.as_ref().ok_or_else(|| usage("--responses is required"))?;
    let cp = m.covariates.as_ref().ok_or_else(|| usage("--covariates is required"))?;
    let (rn, r) = read_matrix_csv(rp)?;
    let (mut cn, mut c) = read_matrix_csv(cp)?;
    if m.add_intercept {
        c = c.insert_column(0, 1.0);
        cn.insert(0, "intercept".into());
    }
    let data = Dataset::with_names(r, c, true, rn, cn)?;
    data.validate_family(family)?;
    Ok(data)
}

fn gating_prior(m: &ModelArgs) -> CliResult<GatingPrior> {
    Ok(match PriorKind::from_str(&m.prior).map_err(|e| usage(e.to_string()))? {
        PriorKind::Ng => GatingPrior::Ng(NgHyper::new(m.theta, m.c0, m.c1)?),
        PriorKind::Ssvs => GatingPrior::Ssvs(SsvsHyper::new(m.spike, m.slab, m.incl_prob)?),
        PriorKind::Flat => {
            if !(m.flat_var > 0.0) {
                return Err(usage("--flat-var must be positive"));
            }
            GatingPrior::Flat(FlatHyper { prior_var: m.flat_var })
        }
    })
}

fn chain_config(m: &ModelArgs, k: usize) -> CliResult<(ChainConfig, Family)> {
    let family = Family::from_str(&m.family).map_err(|e| usage(e.to_string()))?;
    let cfg = ChainConfig {
        k,
        n_burn: m.burn,
        n_save: m.save,
        thin: m.thin,
        prior: gating_prior(m)?,
        family,
        snapshot_count: m.snapshots.min(m.save),
        seed: m.seed,
        permute: !m.no_permute,
        ..ChainConfig::default()
    };
    cfg.validate()?;
    Ok((cfg, family))
}

fn selector(params: &Option<String>) -> ParamSelector {
    match params {
        Some(p) => ParamSelector::Columns(p.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()),
        None => ParamSelector::Default,
    }
}

fn write_summary(store: &DrawsStore, path: &Path) -> CliResult<()> {
    let rows: Vec<Vec<String>> = store
        .summarize()?
        .into_iter()
        .map(|s| vec![s.name, f(s.mean), f(s.sd), f(s.q025), f(s.q500), f(s.q975)])
        .collect();
    write_csv(path, &["parameter", "mean", "sd", "q025", "q500", "q975"], &rows)
}

/// Seed offset of the identification stream, kept apart from chain streams.
const IDENT_STREAM: u64 = 1 << 40;

pub fn fit(a: &FitArgs) -> CliResult<Outputs> {
    let (cfg, family) = chain_config(&a.model, a.k)?;
    let data = load_data(&a.model, family)?;
    std::fs::create_dir_all(&a.out)?;
    info!("fitting K = {} ({} draws after {} burn-in)", a.k, cfg.n_save, cfg.n_burn);
    let store = run_chain(&cfg, &data)?;
    store.save(&a.out.join("draws"))?;
    let mut outputs = vec!["draws/".to_string()];
    let mut result = serde_json::json!({
        "k": a.k,
        "draws": store.len(),
        "prior": store.config.prior.name(),
        "jitter_retries": store.stats.jitter_retries,
        "empty_components": store.stats.empty_components,
    });
    let summary_source = if a.identify && a.k > 1 {
        let mut rng = RngStream::new(a.model.seed, IDENT_STREAM);
        let (ident, res) = identify(&store, &selector(&a.params), &mut rng)?;
        ident.save(&a.out.join("identified"))?;
        outputs.push("identified/".into());
        println!("nonperm_rate = {:.4} ({} of {} draws retained)", res.nonperm_rate, res.retained.len(), store.len());
        result["nonperm_rate"] = serde_json::json!(res.nonperm_rate);
        ident
    } else {
        store
    };
    write_summary(&summary_source, &a.out.join("summary.csv"))?;
    std::fs::write(a.out.join("fit.json"), serde_json::to_string_pretty(&result)?)?;
    outputs.extend(["summary.csv".to_string(), "fit.json".to_string()]);
    Ok(outputs)
}

pub fn identify_cmd(a: &IdentifyArgs) -> CliResult<Outputs> {
    let dir = a.draws.as_ref().ok_or_else(|| usage("--draws is required"))?;
    let store = DrawsStore::load(dir)?;
    let mut rng = RngStream::new(a.seed, IDENT_STREAM);
    let (ident, res) = identify(&store, &selector(&a.params), &mut rng)?;
    std::fs::create_dir_all(&a.out)?;
    ident.save(&a.out.join("draws"))?;
    write_summary(&ident, &a.out.join("summary.csv"))?;
    println!("nonperm_rate = {:.4} ({} of {} draws retained)", res.nonperm_rate, res.retained.len(), store.len());
    Ok(vec!["draws/".into(), "summary.csv".into()])
}

/// Parse `lo:hi` (inclusive) or a comma-separated list.
pub fn parse_k_range(s: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("invalid K range '{s}' (use lo:hi or a comma list)"));
    let ks: Vec<usize> = if let Some((lo, hi)) = s.split_once(':') {
        let (lo, hi): (usize, usize) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
        (lo..=hi).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

pub fn marglik(a: &MarglikArgs) -> CliResult<Outputs> {
    if let Some(o) = &a.oracle {
        if o != "bernoulli-k1" {
            return Err(usage(format!("unknown oracle '{o}' (expected bernoulli-k1)")));
        }
        return oracle_k1(a);
    }
    let ks = parse_k_range(&a.k_range)?;
    let reference = a.reference.unwrap_or(*ks.iter().min().expect("non-empty"));
    if !ks.contains(&reference) {
        return Err(usage(format!("--ref {reference} is not in the K range")));
    }
    let (cfg, family) = chain_config(&a.model, ks[0])?;
    let data = load_data(&a.model, family)?;
    std::fs::create_dir_all(&a.out)?;
    let rows = marglik_for_k(&data, &cfg, &ks, reference, a.importance, BridgeSettings::default())?;
    println!("{:>3} {:>14} {:>10} {:>9} {:>9}", "K", "log_ml", "log_bf", "se", "converged");
    let mut table = Vec::new();
    let mut plot = Vec::new();
    for (r, _) in &rows {
        println!("{:>3} {:>14.4} {:>10.4} {:>9.4} {:>9}", r.k, r.log_ml, r.log_bf, r.se_proxy, r.converged);
        table.push(vec![
            r.k.to_string(),
            f(r.log_ml),
            f(r.log_bf),
            f(r.se_proxy),
            r.converged.to_string(),
            r.iterations.to_string(),
            f(r.start_log_ml_is),
            f(r.start_log_ml_ris),
        ]);
        plot.push(vec![r.k.to_string(), f(r.log_bf)]);
    }
    write_csv(
        &a.out.join("marglik.csv"),
        &["k", "log_ml", "log_bf", "se_proxy", "converged", "iterations", "start_log_ml_is", "start_log_ml_ris"],
        &table,
    )?;
    write_csv(&a.out.join("log_bf_plot.csv"), &["k", "log_bf"], &plot)?;
    Ok(vec!["marglik.csv".into(), "log_bf_plot.csv".into()])
}

fn oracle_k1(a: &MarglikArgs) -> CliResult<Outputs> {
    let (cfg, family) = chain_config(&a.model, 1)?;
    if family != Family::Bernoulli {
        return Err(usage("the bernoulli-k1 oracle needs --family bernoulli"));
    }
    let data = load_data(&a.model, family)?;
    std::fs::create_dir_all(&a.out)?;
    let store = run_chain(&cfg, &data)?;
    let mut rng = RngStream::new(a.model.seed, 1_000);
    let (res, _) = bridge_from_store(&store, &data, a.importance, BridgeSettings::default(), &mut rng)?;
    let analytic = conjugate_bernoulli_log_ml(data.responses(), cfg.bernoulli_a0, cfg.bernoulli_b0);
    println!("analytic log ML  = {analytic:.6}");
    println!("bridge estimate  = {:.6}", res.log_ml);
    println!("difference       = {:.6}", res.log_ml - analytic);
    write_csv(
        &a.out.join("oracle.csv"),
        &["analytic", "estimate", "difference", "iterations", "converged"],
        &[vec![f(analytic), f(res.log_ml), f(res.log_ml - analytic), res.iterations.to_string(), res.converged.to_string()]],
    )?;
    Ok(vec!["oracle.csv".into()])
}

pub fn study(a: &StudyArgs) -> CliResult<Outputs> {
    let kind = match a.id {
        Some(1) => StudyKind::Logit { n_obs: a.n },
        Some(2) => StudyKind::Moe { scenario: Scenario::from_str(&a.scenario).map_err(|e| usage(e.to_string()))? },
        Some(other) => return Err(usage(format!("unknown study id {other} (expected 1 or 2)"))),
        None => return Err(usage("--id is required")),
    };
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let priors = a
        .priors
        .split(',')
        .map(|p| PriorKind::from_str(p.trim()).map_err(|e| usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    let bf_k_range = a.bf_k_range.as_deref().map(parse_k_range).transpose()?;
    let spec = StudySpec {
        kind,
        reps: a.reps,
        priors,
        n_burn: a.burn,
        n_save: a.save,
        snapshot_count: a.snapshots,
        theta: a.theta,
        seed: a.seed,
        bf_k_range,
    };
    let out = run_study(&spec)?;
    out.write_csv(&a.out)?;
    std::fs::write(a.out.join("study.json"), serde_json::to_string_pretty(&out)?)?;
    println!("{:<10} {:>10} {:>13} {:>12} {:>8} {:>8}", "prior", "rmse_zeros", "rmse_nonzeros", "rmse_overall", "rmse_pp", "miscl");
    for r in &out.aggregate {
        println!(
            "{:<10} {:>10.3} {:>13.3} {:>12.3} {:>8.3} {:>8.3}",
            r.prior.name(),
            r.rel_rmse_zeros,
            r.rel_rmse_nonzeros,
            r.rel_rmse_overall,
            r.rel_rmse_pp,
            r.mean.miscl_rate
        );
    }
    let mut outputs = vec!["replications.csv".to_string(), "aggregate.csv".to_string(), "study.json".to_string()];
    if !out.log_bf.is_empty() {
        outputs.push("log_bf.csv".into());
    }
    Ok(outputs)
}
