//! Component (expert) densities: multivariate Bernoulli with Beta priors and
//! multivariate Gaussian with a Normal-Inverse-Wishart prior.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::data::Family;
use crate::error::{Error, Result};
use crate::randkit::special::{ln_beta, ln_mvgamma};
use crate::randkit::RngStream;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const PROB_EPS: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliComponent {
    /// K×J occurrence probabilities.
    pub gamma: DMatrix<f64>,
    pub a0: DVector<f64>,
    pub b0: DVector<f64>,
}

impl BernoulliComponent {
    pub fn new(gamma: DMatrix<f64>, a0: DVector<f64>, b0: DVector<f64>) -> Result<Self> {
        if gamma.ncols() != a0.len() || a0.len() != b0.len() {
            return Err(Error::dim("gamma columns, a0 and b0 must have equal length"));
        }
        if gamma.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return Err(Error::domain("occurrence probabilities must lie in (0,1)"));
        }
        if a0.iter().chain(b0.iter()).any(|v| !(*v > 0.0)) {
            return Err(Error::domain("Beta hyperparameters must be positive"));
        }
        Ok(Self { gamma, a0, b0 })
    }

    /// Uniform Beta(1,1) priors with every γ at 0.5.
    pub fn uniform(k: usize, j: usize) -> Self {
        Self {
            gamma: DMatrix::from_element(k, j, 0.5),
            a0: DVector::from_element(j, 1.0),
            b0: DVector::from_element(j, 1.0),
        }
    }
}

/// Normal-Inverse-Wishart parameters: μ | Σ ~ N(m, Σ/κ), Σ ~ IW(ν, Ψ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NiwParams {
    pub m: DVector<f64>,
    pub kappa: f64,
    pub nu: f64,
    pub psi: DMatrix<f64>,
}

impl NiwParams {
    pub fn new(m: DVector<f64>, kappa: f64, nu: f64, psi: DMatrix<f64>) -> Result<Self> {
        let d = m.len();
        if psi.nrows() != d || psi.ncols() != d {
            return Err(Error::dim(format!("psi must be {d}x{d}")));
        }
        if !(kappa > 0.0) || !(nu > d as f64 - 1.0) {
            return Err(Error::domain(format!("NIW needs kappa > 0 and nu > d-1 (kappa={kappa}, nu={nu}, d={d})")));
        }
        chol(&psi, "NIW scale matrix")?;
        Ok(Self { m, kappa, nu, psi })
    }

    /// Weakly informative default: m = sample mean, κ = 0.01, ν = d + 2,
    /// Ψ = diagonal of sample variances.
    pub fn from_data(y: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = (y.nrows(), y.ncols());
        if n < 2 {
            return Err(Error::Empty("need at least two observations for the NIW default".into()));
        }
        let m = DVector::from_fn(d, |c, _| y.column(c).mean());
        let psi = DMatrix::from_fn(d, d, |r, c| if r == c { y.column(r).variance() * n as f64 / (n as f64 - 1.0) } else { 0.0 });
        Self::new(m, 0.01, d as f64 + 2.0, psi)
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// Conjugate update with the observations in `rows`.
    pub fn posterior(&self, y: &DMatrix<f64>, rows: &[usize]) -> NiwParams {
        let n = rows.len();
        if n == 0 {
            return self.clone();
        }
        let d = self.dim();
        let nf = n as f64;
        let mut ybar = DVector::zeros(d);
        for &i in rows {
            ybar += y.row(i).transpose();
        }
        ybar /= nf;
        let mut s = DMatrix::zeros(d, d);
        for &i in rows {
            let e = y.row(i).transpose() - &ybar;
            s += &e * e.transpose();
        }
        let kappa = self.kappa + nf;
        let m = (&self.m * self.kappa + &ybar * nf) / kappa;
        let diff = &ybar - &self.m;
        let mut psi = &self.psi + s + (&diff * diff.transpose()) * (self.kappa * nf / kappa);
        psi = (&psi + psi.transpose()) * 0.5;
        NiwParams { m, kappa, nu: self.nu + nf, psi }
    }

    /// Log density of (μ, Σ).
    pub fn log_density(&self, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
        let d = self.dim() as f64;
        let lc = chol(sigma, "covariance")?;
        let ld_sigma = log_det_chol(&lc);
        let ld_psi = log_det_chol(&chol(&self.psi, "NIW scale matrix")?);
        let sigma_inv = lc.inverse();
        let trace = (&self.psi * &sigma_inv).trace();
        let log_iw = 0.5 * self.nu * ld_psi
            - 0.5 * self.nu * d * std::f64::consts::LN_2
            - ln_mvgamma(self.dim(), 0.5 * self.nu)
            - 0.5 * (self.nu + d + 1.0) * ld_sigma
            - 0.5 * trace;
        let e = mu - &self.m;
        let quad = (e.transpose() * &sigma_inv * &e)[(0, 0)] * self.kappa;
        let log_n = -0.5 * d * LN_2PI - 0.5 * (ld_sigma - d * self.kappa.ln()) - 0.5 * quad;
        Ok(log_iw + log_n)
    }

    /// Draw (μ, Σ): Σ from the inverse Wishart via the Bartlett
    /// decomposition of Σ⁻¹ ~ W(ν, Ψ⁻¹), then μ | Σ.
    pub fn sample(&self, rng: &mut RngStream) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.dim();
        let psi_inv = chol(&self.psi, "NIW scale matrix")?.inverse();
        let l = chol(&psi_inv, "inverse NIW scale")?.l();
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            a[(i, i)] = (2.0 * rng.gamma(0.5 * (self.nu - i as f64), 1.0)).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.normal();
            }
        }
        let c = l * a;
        let w = &c * c.transpose();
        let mut sigma = chol(&w, "Wishart draw")?.inverse();
        sigma = (&sigma + sigma.transpose()) * 0.5;
        let ls = chol(&sigma, "inverse Wishart draw")?.l();
        let z = DVector::from_fn(d, |_, _| rng.normal());
        let mu = &self.m + ls * z / self.kappa.sqrt();
        Ok((mu, sigma))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    /// K×d means, one row per component.
    pub mu: DMatrix<f64>,
    pub sigma: Vec<DMatrix<f64>>,
    pub niw: NiwParams,
}

impl GaussianComponent {
    pub fn new(mu: DMatrix<f64>, sigma: Vec<DMatrix<f64>>, niw: NiwParams) -> Result<Self> {
        if mu.nrows() != sigma.len() {
            return Err(Error::dim("one covariance per component mean required"));
        }
        for s in &sigma {
            if s.nrows() != mu.ncols() || s.ncols() != mu.ncols() {
                return Err(Error::dim("covariance dimension differs from mean dimension"));
            }
            chol(s, "component covariance")?;
        }
        if niw.dim() != mu.ncols() {
            return Err(Error::dim("NIW dimension differs from mean dimension"));
        }
        Ok(Self { mu, sigma, niw })
    }
}

/// Component parameters for all K experts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Components {
    Bernoulli(BernoulliComponent),
    Gaussian(GaussianComponent),
}

impl Components {
    pub fn k(&self) -> usize {
        match self {
            Components::Bernoulli(b) => b.gamma.nrows(),
            Components::Gaussian(g) => g.mu.nrows(),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Components::Bernoulli(_) => Family::Bernoulli,
            Components::Gaussian(_) => Family::Gaussian,
        }
    }

    /// Response dimension J (or d).
    pub fn dim(&self) -> usize {
        match self {
            Components::Bernoulli(b) => b.gamma.ncols(),
            Components::Gaussian(g) => g.mu.ncols(),
        }
    }

    /// Log density of one response row under component `k` (0-based).
    pub fn component_loglik(&self, y_row: &[f64], k: usize) -> Result<f64> {
        if y_row.len() != self.dim() {
            return Err(Error::dim(format!("response row has {} entries, expected {}", y_row.len(), self.dim())));
        }
        if k >= self.k() {
            return Err(Error::dim(format!("component {k} out of range (K = {})", self.k())));
        }
        match self {
            Components::Bernoulli(b) => Ok(bernoulli_loglik(y_row, b.gamma.row(k).iter().copied())),
            Components::Gaussian(g) => {
                let lc = chol(&g.sigma[k], "component covariance")?;
                Ok(gaussian_loglik(y_row, g.mu.row(k).iter().copied(), &lc))
            }
        }
    }

    /// N×K matrix of log f_k(y_i).
    pub fn loglik_matrix(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.dim() {
            return Err(Error::dim(format!("responses have {} columns, expected {}", y.ncols(), self.dim())));
        }
        let (n, k) = (y.nrows(), self.k());
        let mut out = DMatrix::zeros(n, k);
        let mut row = vec![0.0; y.ncols()];
        match self {
            Components::Bernoulli(b) => {
                let lg = b.gamma.map(|g| g.max(PROB_EPS).ln());
                let l1g = b.gamma.map(|g| (1.0 - g).max(PROB_EPS).ln());
                for i in 0..n {
                    for c in 0..k {
                        let mut s = 0.0;
                        for j in 0..y.ncols() {
                            s += if y[(i, j)] > 0.5 { lg[(c, j)] } else { l1g[(c, j)] };
                        }
                        out[(i, c)] = s;
                    }
                }
            }
            Components::Gaussian(g) => {
                let chols = g.sigma.iter().map(|s| chol(s, "component covariance")).collect::<Result<Vec<_>>>()?;
                for i in 0..n {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = y[(i, j)];
                    }
                    for c in 0..k {
                        out[(i, c)] = gaussian_loglik(&row, g.mu.row(c).iter().copied(), &chols[c]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// New component j takes old component perm[j].
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        match self {
            Components::Bernoulli(b) => Components::Bernoulli(BernoulliComponent {
                gamma: DMatrix::from_fn(b.gamma.nrows(), b.gamma.ncols(), |r, c| b.gamma[(perm[r], c)]),
                a0: b.a0.clone(),
                b0: b.b0.clone(),
            }),
            Components::Gaussian(g) => Components::Gaussian(GaussianComponent {
                mu: DMatrix::from_fn(g.mu.nrows(), g.mu.ncols(), |r, c| g.mu[(perm[r], c)]),
                sigma: perm.iter().map(|&p| g.sigma[p].clone()).collect(),
                niw: g.niw.clone(),
            }),
        }
    }

    /// Component-specific parameter vector used by the point-process
    /// representation (γ_k for Bernoulli; μ_k and the upper triangle of Σ_k
    /// for Gaussian).
    pub fn features(&self, k: usize) -> Vec<f64> {
        match self {
            Components::Bernoulli(b) => b.gamma.row(k).iter().copied().collect(),
            Components::Gaussian(g) => {
                let mut v: Vec<f64> = g.mu.row(k).iter().copied().collect();
                let d = g.mu.ncols();
                for r in 0..d {
                    for c in r..d {
                        v.push(g.sigma[k][(r, c)]);
                    }
                }
                v
            }
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        match self {
            Components::Bernoulli(b) => (0..b.gamma.ncols()).map(|j| format!("gamma_{}", j + 1)).collect(),
            Components::Gaussian(g) => {
                let d = g.mu.ncols();
                let mut v: Vec<String> = (0..d).map(|j| format!("mu_{}", j + 1)).collect();
                for r in 0..d {
                    for c in r..d {
                        v.push(format!("sigma_{}_{}", r + 1, c + 1));
                    }
                }
                v
            }
        }
    }

    /// Full conditional of the component parameters given the labels
    /// (0-based, length N). Empty components fall back to the prior.
    pub fn conditional(&self, y: &DMatrix<f64>, labels: &[usize]) -> Result<ComponentConditional> {
        if y.nrows() != labels.len() {
            return Err(Error::dim("labels and responses differ in length"));
        }
        let k = self.k();
        if let Some(bad) = labels.iter().find(|&&s| s >= k) {
            return Err(Error::domain(format!("label {} outside 1..{k}", bad + 1)));
        }
        match self {
            Components::Bernoulli(b) => {
                let j = b.gamma.ncols();
                let mut ones = DMatrix::<f64>::zeros(k, j);
                let mut counts = vec![0.0; k];
                for (i, &s) in labels.iter().enumerate() {
                    counts[s] += 1.0;
                    for c in 0..j {
                        if y[(i, c)] > 0.5 {
                            ones[(s, c)] += 1.0;
                        }
                    }
                }
                let a = DMatrix::from_fn(k, j, |r, c| b.a0[c] + ones[(r, c)]);
                let bb = DMatrix::from_fn(k, j, |r, c| b.b0[c] + counts[r] - ones[(r, c)]);
                Ok(ComponentConditional::Bernoulli { a, b: bb, a0: b.a0.clone(), b0: b.b0.clone() })
            }
            Components::Gaussian(g) => {
                let mut rows = vec![Vec::new(); k];
                for (i, &s) in labels.iter().enumerate() {
                    rows[s].push(i);
                }
                let params = rows.iter().map(|r| g.niw.posterior(y, r)).collect();
                Ok(ComponentConditional::Gaussian { params, prior: g.niw.clone() })
            }
        }
    }
}

/// Conjugate full conditional of all component parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ComponentConditional {
    Bernoulli { a: DMatrix<f64>, b: DMatrix<f64>, a0: DVector<f64>, b0: DVector<f64> },
    Gaussian { params: Vec<NiwParams>, prior: NiwParams },
}

impl ComponentConditional {
    pub fn sample(&self, rng: &mut RngStream) -> Result<Components> {
        match self {
            ComponentConditional::Bernoulli { a, b, a0, b0 } => {
                let gamma = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| {
                    rng.beta(a[(r, c)], b[(r, c)]).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
                });
                Ok(Components::Bernoulli(BernoulliComponent { gamma, a0: a0.clone(), b0: b0.clone() }))
            }
            ComponentConditional::Gaussian { params, prior } => {
                let d = prior.dim();
                let mut mu = DMatrix::zeros(params.len(), d);
                let mut sigma = Vec::with_capacity(params.len());
                for (k, p) in params.iter().enumerate() {
                    let (m, s) = p.sample(rng)?;
                    mu.set_row(k, &m.transpose());
                    sigma.push(s);
                }
                Ok(Components::Gaussian(GaussianComponent { mu, sigma, niw: prior.clone() }))
            }
        }
    }

    pub fn log_density(&self, comps: &Components) -> Result<f64> {
        match (self, comps) {
            (ComponentConditional::Bernoulli { a, b, .. }, Components::Bernoulli(c)) => {
                if c.gamma.shape() != a.shape() {
                    return Err(Error::dim("component shape differs from conditional"));
                }
                Ok(beta_log_density_sum(&c.gamma, |r, col| (a[(r, col)], b[(r, col)])))
            }
            (ComponentConditional::Gaussian { params, .. }, Components::Gaussian(c)) => {
                if params.len() != c.sigma.len() {
                    return Err(Error::dim("component count differs from conditional"));
                }
                let mut s = 0.0;
                for (k, p) in params.iter().enumerate() {
                    s += p.log_density(&c.mu.row(k).transpose(), &c.sigma[k])?;
                }
                Ok(s)
            }
            _ => Err(Error::Config("component family differs from conditional".into())),
        }
    }
}

/// Log prior density of the component parameters.
pub fn log_prior_components(comps: &Components) -> Result<f64> {
    match comps {
        Components::Bernoulli(b) => {
            if b.gamma.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
                return Err(Error::domain("occurrence probability outside (0,1)"));
            }
            Ok(beta_log_density_sum(&b.gamma, |_, c| (b.a0[c], b.b0[c])))
        }
        Components::Gaussian(g) => {
            let mut s = 0.0;
            for k in 0..g.mu.nrows() {
                s += g.niw.log_density(&g.mu.row(k).transpose(), &g.sigma[k])?;
            }
            Ok(s)
        }
    }
}

fn beta_log_density_sum(gamma: &DMatrix<f64>, ab: impl Fn(usize, usize) -> (f64, f64)) -> f64 {
    let mut s = 0.0;
    for r in 0..gamma.nrows() {
        for c in 0..gamma.ncols() {
            let (a, b) = ab(r, c);
            let g = gamma[(r, c)];
            s += (a - 1.0) * g.ln() + (b - 1.0) * (1.0 - g).ln() - ln_beta(a, b);
        }
    }
    s
}

fn bernoulli_loglik(y: &[f64], gamma: impl Iterator<Item = f64>) -> f64 {
    y.iter()
        .zip(gamma)
        .map(|(&yj, g)| if yj > 0.5 { g.max(PROB_EPS).ln() } else { (1.0 - g).max(PROB_EPS).ln() })
        .sum()
}

fn gaussian_loglik(y: &[f64], mu: impl Iterator<Item = f64>, lc: &Cholesky<f64, Dyn>) -> f64 {
    let d = y.len();
    let e = DVector::from_iterator(d, y.iter().zip(mu).map(|(a, b)| a - b));
    let z = lc.l_dirty().solve_lower_triangular(&e).expect("cholesky factor has a positive diagonal");
    -0.5 * d as f64 * LN_2PI - 0.5 * log_det_chol(lc) - 0.5 * z.norm_squared()
}

pub(crate) fn chol(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite(format!("{what} has non-finite entries")));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub(crate) fn log_det_chol(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}
