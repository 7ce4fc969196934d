//! Single-block full-conditional updates.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::ChainState;
use crate::error::{Error, Result};
use crate::marglik::logsumexp;
use crate::model::prior::log_normal;
use crate::model::{ComponentConditional, Components, Dataset, GatingCoefficients, GatingPrior, LabelVector, PriorState};
use crate::randkit::{sample_gig, sample_pg1, GigParams, RngStream};

/// Smallest local scale kept by the NG update.
pub const TAU2_FLOOR: f64 = 1e-298;
/// Largest prior precision passed to the gating update.
pub const PRECISION_CAP: f64 = 1e300;

/// Draw every S_i with probability ∝ η_k(x_i) f_k(y_i), normalized in logs.
pub fn update_labels(state: &ChainState, data: &Dataset, rng: &mut RngStream) -> Result<LabelVector> {
    let comps = state.components.as_ref().ok_or_else(|| Error::Config("label update needs components".into()))?;
    let lf = comps.loglik_matrix(data.responses())?;
    let lp = state.beta.log_probs_matrix(data.covariates())?;
    labels_from(&lf, &lp, rng)
}

pub(crate) fn labels_from(lf: &DMatrix<f64>, lp: &DMatrix<f64>, rng: &mut RngStream) -> Result<LabelVector> {
    let (n, k) = lf.shape();
    let mut w = vec![0.0; k];
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        for c in 0..k {
            w[c] = lf[(i, c)] + lp[(i, c)];
        }
        s.push(rng.categorical_log(&w));
    }
    LabelVector::new(s, k)
}

/// Class-membership probabilities p_{i,k} ∝ η_k f_k for one row.
pub fn membership_probs(log_eta: &[f64], log_f: &[f64]) -> Result<Vec<f64>> {
    let w: Vec<f64> = log_eta.iter().zip(log_f).map(|(a, b)| a + b).collect();
    let lse = logsumexp(&w)?;
    Ok(w.into_iter().map(|v| (v - lse).exp()).collect())
}

/// C_{i,k} = log Σ_{j≠k} exp(x_i'β_j), baseline included as exp(0).
pub fn offsets(lin: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let (n, km1) = lin.shape();
    let mut buf = Vec::with_capacity(km1);
    (0..n)
        .map(|i| {
            buf.clear();
            buf.extend((0..km1).filter(|&j| j != k).map(|j| lin[(i, j)]));
            buf.push(0.0);
            logsumexp(&buf).expect("non-empty")
        })
        .collect()
}

/// Draw ω_{i,k} ~ PG(1, x_i'β_k − C_{i,k}) for all non-baseline k at the
/// current β.
pub fn update_omega(state: &ChainState, data: &Dataset, rng: &mut RngStream) -> DMatrix<f64> {
    let lin = data.covariates() * state.beta.matrix().transpose();
    let (n, km1) = lin.shape();
    let mut omega = DMatrix::zeros(n, km1);
    for k in 0..km1 {
        let c = offsets(&lin, k);
        for i in 0..n {
            omega[(i, k)] = sample_pg1(lin[(i, k)] - c[i], rng);
        }
    }
    omega
}

/// Normal full conditional of one gating row given ω.
pub struct BetaConditional {
    pub mean: DVector<f64>,
    /// Lower Cholesky factor of the posterior precision.
    pub prec_chol: DMatrix<f64>,
    pub jittered: bool,
}

/// Posterior precision X'ΩX + diag(prior precision) and mean
/// V·X'(κ + Ω·C), κ_i = 1(S_i = k) − ½.
pub fn beta_conditional(
    x: &DMatrix<f64>,
    omega: &[f64],
    offset: &[f64],
    is_k: &[bool],
    prior_prec: &[f64],
) -> Result<BetaConditional> {
    let (n, p) = x.shape();
    let mut xs = x.clone();
    let mut rhs = DVector::zeros(p);
    for i in 0..n {
        let w = omega[i];
        let kappa = if is_k[i] { 0.5 } else { -0.5 };
        let t = kappa + w * offset[i];
        let sw = w.sqrt();
        for j in 0..p {
            rhs[j] += x[(i, j)] * t;
            xs[(i, j)] *= sw;
        }
    }
    let mut prec = xs.tr_mul(&xs);
    for j in 0..p {
        prec[(j, j)] += prior_prec[j].min(PRECISION_CAP);
    }
    let (chol, jittered) = match Cholesky::new(prec.clone()) {
        Some(c) => (c, false),
        None => {
            let scale = prec.diagonal().amax().max(1.0);
            for j in 0..p {
                prec[(j, j)] += 1e-10 * scale;
            }
            let c = Cholesky::new(prec).ok_or_else(|| Error::NotPositiveDefinite("gating posterior precision".into()))?;
            (c, true)
        }
    };
    let mean = chol.solve(&rhs);
    Ok(BetaConditional { mean, prec_chol: chol.l(), jittered })
}

impl BetaConditional {
    pub fn sample(&self, rng: &mut RngStream) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.normal());
        let v = self.prec_chol.transpose().solve_upper_triangular(&z).expect("positive diagonal");
        &self.mean + v
    }
}

/// Prior precisions of all gating coefficients under the current prior state.
pub fn prior_precisions(state: &PriorState, hyper: &GatingPrior, k: usize, p: usize) -> Result<DMatrix<f64>> {
    Ok(state.variances(hyper, k, p)?.map(|v| (1.0 / v).min(PRECISION_CAP)))
}

/// Interleaved ω_k / β_k updates for every non-baseline group. `labels` are
/// the current memberships. Returns the conditionals used for each row.
pub fn update_gating(
    beta: &mut GatingCoefficients,
    omega: &mut DMatrix<f64>,
    x: &DMatrix<f64>,
    labels: &[usize],
    prior_state: &PriorState,
    hyper: &GatingPrior,
    rng: &mut RngStream,
) -> Result<Vec<BetaConditional>> {
    let (k, p) = (beta.k(), beta.p());
    let n = x.nrows();
    let prec = prior_precisions(prior_state, hyper, k, p)?;
    let mut lin = x * beta.matrix().transpose();
    let mut conds = Vec::with_capacity(k - 1);
    let mut om = vec![0.0; n];
    let mut is_k = vec![false; n];
    let mut buf = Vec::with_capacity(p);
    for g in 0..k - 1 {
        let c = offsets(&lin, g);
        for i in 0..n {
            om[i] = sample_pg1(lin[(i, g)] - c[i], rng);
            omega[(i, g)] = om[i];
            is_k[i] = labels[i] == g;
        }
        buf.clear();
        buf.extend(prec.row(g).iter().copied());
        let cond = beta_conditional(x, &om, &c, &is_k, &buf)?;
        let draw = cond.sample(rng);
        beta.matrix_mut().set_row(g, &draw.transpose());
        let col = x * &draw;
        lin.set_column(g, &col);
        conds.push(cond);
    }
    Ok(conds)
}

/// One local scale: τ² | β, λ ~ GIG(θ − ½, λβ²/2, 2θ).
pub fn draw_tau2(beta: f64, lambda: f64, theta: f64, rng: &mut RngStream) -> Result<f64> {
    let index = theta - 0.5;
    let mut chi = lambda * beta * beta / 2.0;
    if chi <= 0.0 && index <= 0.0 {
        chi = 1e-300;
    }
    let t = sample_gig(GigParams::new(index, chi, 2.0 * theta)?, rng)?;
    Ok(t.max(TAU2_FLOOR))
}

/// One global scale: λ | β, τ² ~ Gamma(P/2 + c0, c1 + Σ_p β_p²/(4τ²_p)).
pub fn draw_lambda(beta: &[f64], tau2: &[f64], c0: f64, c1: f64, rng: &mut RngStream) -> f64 {
    let ssq: f64 = beta.iter().zip(tau2).map(|(b, t)| b * b / (4.0 * t)).sum();
    rng.gamma(0.5 * beta.len() as f64 + c0, c1 + ssq).max(f64::MIN_POSITIVE)
}

/// Local scales for every coefficient, then the global scale of each group.
pub fn update_shrinkage_ng(
    beta: &GatingCoefficients,
    state: &mut crate::model::NgState,
    hyper: &crate::model::NgHyper,
    rng: &mut RngStream,
) -> Result<()> {
    let m = beta.matrix();
    let (rows, p) = m.shape();
    for k in 0..rows {
        for j in 0..p {
            state.tau2[(k, j)] = draw_tau2(m[(k, j)], state.lambda[k], hyper.theta, rng)?;
        }
        let b: Vec<f64> = m.row(k).iter().copied().collect();
        let t: Vec<f64> = state.tau2.row(k).iter().copied().collect();
        state.lambda[k] = draw_lambda(&b, &t, hyper.c0, hyper.c1, rng);
    }
    Ok(())
}

/// Posterior inclusion probability of one coefficient.
pub fn ssvs_inclusion_prob(beta: f64, h: &crate::model::SsvsHyper) -> f64 {
    if h.incl_prob >= 1.0 {
        return 1.0;
    }
    if h.incl_prob <= 0.0 {
        return 0.0;
    }
    let a = h.incl_prob.ln() + log_normal(beta, h.slab_var);
    let b = (1.0 - h.incl_prob).ln() + log_normal(beta, h.spike_var);
    1.0 / (1.0 + (b - a).exp())
}

pub fn update_ssvs(
    beta: &GatingCoefficients,
    state: &mut crate::model::SsvsState,
    hyper: &crate::model::SsvsHyper,
    rng: &mut RngStream,
) {
    let m = beta.matrix();
    for (d, b) in state.delta.iter_mut().zip(m.iter()) {
        *d = u8::from(rng.uniform() < ssvs_inclusion_prob(*b, hyper));
    }
}

/// Draw the component parameters from their conjugate conditional; the
/// conditional is returned for snapshot capture.
pub fn update_components(
    comps: &Components,
    y: &DMatrix<f64>,
    labels: &[usize],
    rng: &mut RngStream,
) -> Result<(Components, ComponentConditional)> {
    let cond = comps.conditional(y, labels)?;
    let next = cond.sample(rng)?;
    Ok((next, cond))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NgHyper, NgState, SsvsHyper, SsvsState};

    #[test]
    fn membership_examples() {
        let p = membership_probs(&[0.5f64.ln(), 0.5f64.ln()], &[0.9f64.ln(), 0.1f64.ln()]).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15 && (p[1] - 0.1).abs() < 1e-15);
        let p = membership_probs(&[0.0, 0.0], &[-1e9, -1e9 + 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-6 && (p[1] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn offset_example() {
        let lin = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let c = offsets(&lin, 0);
        assert!((c[0] - (2f64.exp() + 1.0).ln()).abs() < 1e-14);
        assert!((1.0 - c[0] + 1.126_928_011_042_972_5).abs() < 1e-12);
        let zero = DMatrix::zeros(3, 1);
        assert!(offsets(&zero, 0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn total_shrinkage_pulls_mean_to_zero() {
        let x = DMatrix::from_element(5, 1, 1.0);
        let c = beta_conditional(&x, &[0.3; 5], &[0.0; 5], &[true; 5], &[1e12]).unwrap();
        assert!(c.mean[0].abs() < 1e-11);
    }

    #[test]
    fn weighted_least_squares_limit() {
        // N = 3, P = 1 by hand: (Σ ω x²)⁻¹ Σ x (κ + ω C)
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
        let om = [0.2, 0.5, 0.25];
        let c = [0.1, -0.3, 0.7];
        let is_k = [true, false, true];
        let cond = beta_conditional(&x, &om, &c, &is_k, &[0.0]).unwrap();
        let num = 1.0 * (0.5 + 0.2 * 0.1) + 2.0 * (-0.5 + 0.5 * -0.3) + -1.0 * (0.5 + 0.25 * 0.7);
        let den = 0.2 + 0.5 * 4.0 + 0.25;
        assert!((cond.mean[0] - num / den).abs() < 1e-14);
        assert!((cond.prec_chol[(0, 0)].powi(2) - den).abs() < 1e-14);
    }

    #[test]
    fn ssvs_probabilities() {
        let h = SsvsHyper::default();
        let p0 = ssvs_inclusion_prob(0.0, &h);
        let n = |v: f64| 1.0 / (2.0 * std::f64::consts::PI * v).sqrt();
        assert!((p0 - n(1.0) / (n(1.0) + n(0.01))).abs() < 1e-14);
        assert!((p0 - 0.0909).abs() < 1e-4);
        assert!(ssvs_inclusion_prob(3.0, &h) > 0.9999);
        let all = SsvsHyper { incl_prob: 1.0, ..h };
        let b = GatingCoefficients::zeros(3, 4);
        let mut s = SsvsState { delta: DMatrix::zeros(2, 4) };
        update_ssvs(&b, &mut s, &all, &mut RngStream::new(1, 0));
        assert!(s.delta.iter().all(|d| *d == 1));
    }

    #[test]
    fn ng_update_handles_zero_coefficients() {
        let b = GatingCoefficients::zeros(3, 2);
        let mut rng = RngStream::new(2, 0);
        for theta in [0.1, 0.5, 1.0] {
            let mut s = NgState::ones(3, 2);
            let h = NgHyper::new(theta, 0.01, 0.01).unwrap();
            update_shrinkage_ng(&b, &mut s, &h, &mut rng).unwrap();
            assert!(s.tau2.iter().chain(s.lambda.iter()).all(|v| *v > 0.0 && v.is_finite()));
        }
    }
}
