//! Data generators for the two simulation studies.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, GatingCoefficients, LabelVector};
use crate::randkit::RngStream;

/// Number of logit predictors in the medium-size designs.
pub const STUDY_P: usize = 20;
pub const STUDY_K: usize = 4;

/// True non-baseline logit coefficients of the first study (3×20).
pub fn study1_true_beta() -> DMatrix<f64> {
    let mut b = DMatrix::zeros(3, STUDY_P);
    for (c, v) in [0.8, 1.0, 2.0, 0.5].into_iter().enumerate() {
        b[(0, c)] = v;
    }
    for (c, v) in [0.3, 0.0, 0.0, 0.0, -1.0, 1.7, -2.0].into_iter().enumerate() {
        b[(1, c)] = v;
    }
    for (c, v) in [0.3, 1.0, -2.0, 0.8, 0.9].into_iter().enumerate() {
        b[(2, c)] = v;
    }
    b
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Study1Design {
    pub n_obs: usize,
}

/// Multinomial-logit data with known truth.
#[derive(Clone, Debug)]
pub struct LogitData {
    pub x: DMatrix<f64>,
    pub labels: LabelVector,
    pub probs: DMatrix<f64>,
    pub beta: DMatrix<f64>,
}

fn draw_logit_labels(x: &DMatrix<f64>, beta: &DMatrix<f64>, rng: &mut RngStream) -> Result<(LabelVector, DMatrix<f64>)> {
    let lp = GatingCoefficients::new(beta.clone())?.log_probs_matrix(x)?;
    let k = beta.nrows() + 1;
    let mut s = Vec::with_capacity(x.nrows());
    for i in 0..x.nrows() {
        let row: Vec<f64> = lp.row(i).iter().copied().collect();
        s.push(rng.categorical_log(&row));
    }
    Ok((LabelVector::new(s, k)?, lp.map(f64::exp)))
}

/// Standard normal covariates (no intercept) with labels from the logit of
/// [`study1_true_beta`].
pub fn gen_study1(design: &Study1Design, rng: &mut RngStream) -> Result<LogitData> {
    if design.n_obs < 2 {
        return Err(Error::Config("study 1 needs at least 2 observations".into()));
    }
    let x = DMatrix::from_fn(design.n_obs, STUDY_P, |_, _| rng.normal());
    let beta = study1_true_beta();
    let (labels, probs) = draw_logit_labels(&x, &beta, rng)?;
    Ok(LogitData { x, labels, probs, beta })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    WellSeparated,
    Overlapping,
    HighSparsity,
    ComplexSparsity,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::WellSeparated, Scenario::Overlapping, Scenario::HighSparsity, Scenario::ComplexSparsity];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::WellSeparated => "well-separated",
            Scenario::Overlapping => "overlapping",
            Scenario::HighSparsity => "high-sparsity",
            Scenario::ComplexSparsity => "complex-sparsity",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Study2Design {
    pub scenario: Scenario,
    pub n_obs: usize,
    pub means: DMatrix<f64>,
    pub cov_scale: f64,
    pub extra_noise_covariates: usize,
}

impl Study2Design {
    pub fn new(scenario: Scenario) -> Self {
        let ws = [-1.5, -0.5, 0.0, 1.3, 1.0, -1.0, 3.0, -2.0];
        let ov = [-1.5, 0.0, 0.5, 0.5, 1.0, -0.5, 3.0, -0.5];
        let (m, cov, extra) = match scenario {
            Scenario::Overlapping => (ov, 0.2, 0),
            Scenario::HighSparsity => (ws, 0.25, 60),
            Scenario::WellSeparated | Scenario::ComplexSparsity => (ws, 0.25, 0),
        };
        Self { scenario, n_obs: 300, means: DMatrix::from_row_slice(4, 2, &m), cov_scale: cov, extra_noise_covariates: extra }
    }

    /// Number of predictors excluding the intercept.
    pub fn n_predictors(&self) -> usize {
        STUDY_P + self.extra_noise_covariates
    }

    /// True non-baseline coefficients including the leading intercept
    /// column (zero in truth).
    pub fn true_beta(&self) -> DMatrix<f64> {
        let p = self.n_predictors();
        let mut b = DMatrix::zeros(3, p + 1);
        match self.scenario {
            Scenario::ComplexSparsity => {
                // group-specific blocks with alternating unit signs; the
                // eleventh predictor loads on every group
                let blocks: [(usize, usize); 3] = [(0, 3), (3, 6), (6, 10)];
                for (g, (lo, hi)) in blocks.into_iter().enumerate() {
                    for (t, c) in (lo..hi).enumerate() {
                        b[(g, c + 1)] = if t % 2 == 0 { 1.0 } else { -1.0 };
                    }
                    b[(g, 11)] = if g % 2 == 0 { 1.0 } else { -1.0 };
                }
            }
            _ => {
                let s1 = study1_true_beta();
                for g in 0..3 {
                    for c in 0..STUDY_P {
                        b[(g, c + 1)] = s1[(g, c)];
                    }
                }
            }
        }
        b
    }
}

/// Mixture-of-experts data with bivariate normal components.
#[derive(Clone, Debug)]
pub struct MoeData {
    pub data: Dataset,
    pub labels: LabelVector,
    /// True gating probabilities η_k(x_i).
    pub probs: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub means: DMatrix<f64>,
    pub cov_scale: f64,
}

pub fn gen_study2(design: &Study2Design, rng: &mut RngStream) -> Result<MoeData> {
    let n = design.n_obs;
    if n < 2 {
        return Err(Error::Config("study 2 needs at least 2 observations".into()));
    }
    let p = design.n_predictors();
    let x = DMatrix::from_fn(n, p + 1, |_, c| if c == 0 { 1.0 } else { rng.normal() });
    let beta = design.true_beta();
    let (labels, probs) = draw_logit_labels(&x, &beta, rng)?;
    let sd = design.cov_scale.sqrt();
    let y = DMatrix::from_fn(n, 2, |i, c| design.means[(labels.as_slice()[i], c)] + sd * rng.normal());
    let y_names = vec!["y1".to_string(), "y2".to_string()];
    let x_names = std::iter::once("intercept".to_string()).chain((1..=p).map(|c| format!("x{c}"))).collect();
    let data = Dataset::with_names(y, x, true, y_names, x_names)?;
    Ok(MoeData { data, labels, probs, beta, means: design.means.clone(), cov_scale: design.cov_scale })
}

/// Per-class posterior membership probabilities under the true generator.
pub fn true_membership(d: &MoeData) -> Result<DMatrix<f64>> {
    let y = d.data.responses();
    let (n, k) = (y.nrows(), d.means.nrows());
    let mut out = DMatrix::zeros(n, k);
    for i in 0..n {
        let mut w = vec![0.0; k];
        for (c, wc) in w.iter_mut().enumerate() {
            let e = DVector::from_fn(2, |r, _| y[(i, r)] - d.means[(c, r)]);
            *wc = d.probs[(i, c)].ln() - 0.5 * e.norm_squared() / d.cov_scale;
        }
        let lse = crate::marglik::logsumexp(&w)?;
        for c in 0..k {
            out[(i, c)] = (w[c] - lse).exp();
        }
    }
    Ok(out)
}
