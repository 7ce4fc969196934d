//! Special functions: modified Bessel function of the second kind for real
//! order, and a few log-scale helpers.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use statrs::function::beta::ln_beta;
pub use statrs::function::gamma::ln_gamma;

const EPS: f64 = 1e-16;
const MAXIT: usize = 10_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// K_nu(x) for real `nu` and `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    Ok(log_bessel_k(nu, x)?.exp())
}

/// ln K_nu(x). Finite for all `x > 0`, including where K_nu(x) itself
/// under- or overflows.
pub fn log_bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("bessel_k requires finite x > 0, got {x}")));
    }
    if !nu.is_finite() {
        return Err(Error::domain(format!("bessel_k requires finite order, got {nu}")));
    }
    let nu = nu.abs();
    let (ln_k, _) = log_k_pair(nu, x);
    if ln_k.is_finite() {
        return Ok(ln_k);
    }
    // Upward recurrence overflowed: x is tiny relative to the order.
    Ok(small_x_asymptotic(nu, x))
}

fn small_x_asymptotic(nu: f64, x: f64) -> f64 {
    if nu == 0.0 {
        (-(0.5 * x).ln() - EULER_GAMMA).ln()
    } else {
        ln_gamma(nu) - std::f64::consts::LN_2 + nu * (2.0 / x).ln()
    }
}

/// Returns (ln K_nu(x), ln K_{nu+1}(x)) for nu >= 0.
///
/// Temme's series for x < 2 and Steed's continued fraction otherwise,
/// both on the reduced order |mu| <= 1/2, followed by forward recurrence.
/// The continued-fraction branch carries an e^{-x} scale factor so that
/// large arguments do not underflow.
fn log_k_pair(nu: f64, x: f64) -> (f64, f64) {
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    let (mut k_mu, mut k_mu1, log_scale) = if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum, sum1 * xi2, 0.0)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..MAXIT {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        // scaled by e^{x}
        let k = (PI / (2.0 * x)).sqrt() / s;
        (k, k * (mu + x + 0.5 - h) * xi, -x)
    };

    for i in 1..=nl {
        let next = (mu + i as f64) * xi2 * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    (k_mu.ln() + log_scale, k_mu1.ln() + log_scale)
}

/// Gamma-function combinations used by Temme's series, for |x| <= 1/2:
/// gam1 = (1/G(1-x) - 1/G(1+x)) / (2x), gam2 = (1/G(1-x) + 1/G(1+x)) / 2,
/// gampl = 1/G(1+x), gammi = 1/G(1-x).
fn temme_gammas(x: f64) -> (f64, f64, f64, f64) {
    const C1: [f64; 7] = [
        -1.142_022_680_371_168e0,
        6.516_511_267_073_7e-3,
        3.087_090_173_086e-4,
        -3.470_626_964_9e-6,
        6.943_766_4e-9,
        3.677_95e-11,
        -1.356e-13,
    ];
    const C2: [f64; 8] = [
        1.843_740_587_300_905e0,
        -7.685_284_084_478_67e-2,
        1.271_927_136_654_6e-3,
        -4.971_736_704_2e-6,
        -3.312_611_98e-8,
        2.423_096e-10,
        -1.702e-13,
        -1.49e-15,
    ];
    let xx = 8.0 * x * x - 1.0;
    let gam1 = chebev(&C1, xx);
    let gam2 = chebev(&C2, xx);
    (gam1, gam2, gam2 - x * gam1, gam2 + x * gam1)
}

// Clenshaw evaluation on [-1, 1] with the leading coefficient halved.
fn chebev(c: &[f64], y: f64) -> f64 {
    let y2 = 2.0 * y;
    let mut d = 0.0;
    let mut dd = 0.0;
    for &cj in c.iter().skip(1).rev() {
        let sv = d;
        d = y2 * d - dd + cj;
        dd = sv;
    }
    y * d - dd + 0.5 * c[0]
}

/// ln Phi(z) for the standard normal CDF, accurate in the far left tail.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z > -20.0 {
        (0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// ln of the multivariate gamma function Gamma_d(a).
pub fn ln_mvgamma(d: usize, a: f64) -> f64 {
    let df = d as f64;
    0.25 * df * (df - 1.0) * PI.ln() + (0..d).map(|j| ln_gamma(a - 0.5 * j as f64)).sum::<f64>()
}
