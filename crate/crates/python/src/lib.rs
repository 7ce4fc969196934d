//! Python bindings: samplers and special functions, data simulation,
//! model fitting with identification, and marginal likelihoods.

use std::str::FromStr;

use ngmoe::bench::{gen_study1, gen_study2, PriorKind, Scenario, Study1Design, Study2Design};
use ngmoe::gibbs::{run_chain, ChainConfig, DrawsStore};
use ngmoe::ident::{identify, ParamSelector};
use ngmoe::marglik::{conjugate_bernoulli_log_ml, marglik_for_k, BridgeSettings};
use ngmoe::model::{Dataset, Family, GatingCoefficients};
use ngmoe::nalgebra::DMatrix;
use ngmoe::randkit::{self, GigParams, PgParams, RngStream};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(ngmoe_py, NgmoeError, PyException);

fn err(e: ngmoe::Error) -> PyErr {
    NgmoeError::new_err(e.to_string())
}

/// Row-major nested lists to a matrix; ragged input is an error.
pub fn to_matrix(rows: &[Vec<f64>]) -> ngmoe::Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(ngmoe::Error::Dimension("rows have different lengths".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `n` draws from PG(b, c).
#[pyfunction]
#[pyo3(signature = (b, c, n, seed=1))]
fn sample_pg(b: f64, c: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let p = PgParams::new(b, c).map_err(err)?;
    let mut rng = RngStream::new(seed, 0);
    (0..n).map(|_| randkit::sample_pg(p, &mut rng).map_err(err)).collect()
}

/// `n` draws from GIG(p, chi, psi) with density ∝ x^(p-1) exp(-(chi/x + psi x)/2).
#[pyfunction]
#[pyo3(signature = (p, chi, psi, n, seed=1))]
fn sample_gig(p: f64, chi: f64, psi: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let g = GigParams::new(p, chi, psi).map_err(err)?;
    let mut rng = RngStream::new(seed, 0);
    (0..n).map(|_| randkit::sample_gig(g, &mut rng).map_err(err)).collect()
}

/// Modified Bessel function of the second kind K_nu(x).
#[pyfunction]
fn bessel_k(nu: f64, x: f64) -> PyResult<f64> {
    randkit::bessel_k(nu, x).map_err(err)
}

/// Log density of one gating coefficient under the normal-gamma prior with
/// the local scale integrated out.
#[pyfunction]
fn log_prior_beta_marginal(beta: f64, theta: f64, lam: f64) -> PyResult<f64> {
    ngmoe::model::log_prior_beta_marginal(beta, theta, lam).map_err(err)
}

/// Multinomial-logit membership probabilities of one covariate row;
/// `beta` has K-1 rows (the last group is the baseline).
#[pyfunction]
fn gating_probs(x_row: Vec<f64>, beta: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let b = GatingCoefficients::new(to_matrix(&beta).map_err(err)?).map_err(err)?;
    ngmoe::model::gating_probs(&x_row, &b).map_err(err)
}

/// Closed-form log evidence of a single Bernoulli class with Beta(a0, b0) priors.
#[pyfunction]
#[pyo3(signature = (y, a0=1.0, b0=1.0))]
fn bernoulli_log_evidence(y: Vec<Vec<f64>>, a0: f64, b0: f64) -> PyResult<f64> {
    Ok(conjugate_bernoulli_log_ml(&to_matrix(&y).map_err(err)?, a0, b0))
}

/// Simulate a study dataset. Returns a dict with `responses`,
/// `covariates`, `labels` (0-based) and `beta`.
#[pyfunction]
#[pyo3(signature = (study=2, scenario="well-separated", n=300, seed=1))]
fn simulate<'py>(py: Python<'py>, study: u8, scenario: &str, n: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let mut rng = RngStream::new(seed, 0);
    let d = PyDict::new(py);
    match study {
        1 => {
            let s = gen_study1(&Study1Design { n_obs: n }, &mut rng).map_err(err)?;
            d.set_item("responses", s.labels.as_slice().iter().map(|&v| vec![v as f64]).collect::<Vec<_>>())?;
            d.set_item("covariates", from_matrix(&s.x))?;
            d.set_item("labels", s.labels.as_slice().to_vec())?;
            d.set_item("beta", from_matrix(&s.beta))?;
        }
        2 => {
            let sc = Scenario::from_str(scenario).map_err(err)?;
            let s = gen_study2(&Study2Design { n_obs: n, ..Study2Design::new(sc) }, &mut rng).map_err(err)?;
            d.set_item("responses", from_matrix(s.data.responses()))?;
            d.set_item("covariates", from_matrix(s.data.covariates()))?;
            d.set_item("labels", s.labels.as_slice().to_vec())?;
            d.set_item("beta", from_matrix(&s.beta))?;
        }
        other => return Err(NgmoeError::new_err(format!("unknown study {other}"))),
    }
    Ok(d)
}

/// Draws of one fitted chain.
#[pyclass(module = "ngmoe_py")]
pub struct Fit {
    store: DrawsStore,
    identified: Option<DrawsStore>,
    #[pyo3(get)]
    nonperm_rate: Option<f64>,
}

#[pymethods]
impl Fit {
    /// Number of saved draws.
    #[getter]
    fn n_draws(&self) -> usize {
        self.store.len()
    }

    /// Posterior mean of the gating coefficients (identified draws when available).
    fn beta_mean(&self) -> PyResult<Vec<Vec<f64>>> {
        let s = self.identified.as_ref().unwrap_or(&self.store);
        Ok(from_matrix(s.mean_beta().map_err(err)?.matrix()))
    }

    /// Per-parameter summaries as dicts (name, mean, sd, q025, q500, q975).
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let s = self.identified.as_ref().unwrap_or(&self.store);
        s.summarize()
            .map_err(err)?
            .into_iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("name", r.name)?;
                d.set_item("mean", r.mean)?;
                d.set_item("sd", r.sd)?;
                d.set_item("q025", r.q025)?;
                d.set_item("q500", r.q500)?;
                d.set_item("q975", r.q975)?;
                Ok(d)
            })
            .collect()
    }

    /// Write the raw draws (and identified draws, if any) below `dir`.
    fn save(&self, dir: &str) -> PyResult<()> {
        let dir = std::path::Path::new(dir);
        self.store.save(&dir.join("draws")).map_err(err)?;
        if let Some(i) = &self.identified {
            i.save(&dir.join("identified")).map_err(err)?;
        }
        Ok(())
    }
}

fn chain_config(k: usize, family: &str, prior: &str, theta: f64, burn: usize, save: usize, seed: u64) -> ngmoe::Result<ChainConfig> {
    let cfg = ChainConfig {
        k,
        n_burn: burn,
        n_save: save,
        prior: PriorKind::from_str(prior)?.gating_prior(theta),
        family: Family::from_str(family)?,
        snapshot_count: 100.min(save),
        seed,
        ..ChainConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn dataset(responses: &[Vec<f64>], covariates: &[Vec<f64>], family: Family) -> ngmoe::Result<Dataset> {
    let d = Dataset::new(to_matrix(responses)?, to_matrix(covariates)?, true)?;
    d.validate_family(family)?;
    Ok(d)
}

/// Run the sampler; `covariates` must start with an intercept column.
#[pyfunction]
#[pyo3(signature = (responses, covariates, k=2, family="bernoulli", prior="ng", theta=0.1, burn=1000, save=5000, seed=1, identify_draws=true))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    responses: Vec<Vec<f64>>,
    covariates: Vec<Vec<f64>>,
    k: usize,
    family: &str,
    prior: &str,
    theta: f64,
    burn: usize,
    save: usize,
    seed: u64,
    identify_draws: bool,
) -> PyResult<Fit> {
    let cfg = chain_config(k, family, prior, theta, burn, save, seed).map_err(err)?;
    let data = dataset(&responses, &covariates, cfg.family).map_err(err)?;
    py.detach(|| {
        let store = run_chain(&cfg, &data)?;
        let (identified, nonperm_rate) = if identify_draws && k > 1 {
            let (s, r) = identify(&store, &ParamSelector::Default, &mut RngStream::new(seed, 1 << 40))?;
            (Some(s), Some(r.nonperm_rate))
        } else {
            (None, None)
        };
        Ok(Fit { store, identified, nonperm_rate })
    })
    .map_err(err)
}

/// Bridge-sampling log marginal likelihoods for each K; returns a list of
/// dicts with `k`, `log_ml`, `log_bf` (against `reference`) and `converged`.
#[pyfunction]
#[pyo3(signature = (responses, covariates, ks, reference, family="bernoulli", prior="ng", theta=0.1, burn=1000, save=5000, seed=1))]
#[allow(clippy::too_many_arguments)]
fn marglik<'py>(
    py: Python<'py>,
    responses: Vec<Vec<f64>>,
    covariates: Vec<Vec<f64>>,
    ks: Vec<usize>,
    reference: usize,
    family: &str,
    prior: &str,
    theta: f64,
    burn: usize,
    save: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let first = *ks.first().ok_or_else(|| NgmoeError::new_err("empty K list"))?;
    let cfg = chain_config(first, family, prior, theta, burn, save, seed).map_err(err)?;
    let data = dataset(&responses, &covariates, cfg.family).map_err(err)?;
    let rows = py.detach(|| marglik_for_k(&data, &cfg, &ks, reference, None, BridgeSettings::default())).map_err(err)?;
    rows.into_iter()
        .map(|(r, _)| {
            let d = PyDict::new(py);
            d.set_item("k", r.k)?;
            d.set_item("log_ml", r.log_ml)?;
            d.set_item("log_bf", r.log_bf)?;
            d.set_item("se_proxy", r.se_proxy)?;
            d.set_item("converged", r.converged)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn ngmoe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NgmoeError", m.py().get_type::<NgmoeError>())?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(sample_pg, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gig, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_k, m)?)?;
    m.add_function(wrap_pyfunction!(log_prior_beta_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(gating_probs, m)?)?;
    m.add_function(wrap_pyfunction!(bernoulli_log_evidence, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(marglik, m)?)?;
    Ok(())
}
