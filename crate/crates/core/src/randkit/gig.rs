//! Generalized inverse Gaussian variates.
//!
//! Density convention: f(x) ∝ x^{p-1} exp(-(chi/x + psi*x)/2), x > 0.
//! Sampling follows Hörmann & Leydold's three-regime scheme: ratio of
//! uniforms with mode shift, ratio of uniforms without shift, and a
//! concave/convex split hat for small omega and p < 1. Degenerate
//! chi = 0 or psi = 0 cases reduce to (inverse) gamma draws.

use super::special::log_bessel_k;
use super::RngStream;
use crate::error::{Error, Result};

/// GIG(p, chi, psi).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GigParams {
    pub p: f64,
    pub chi: f64,
    pub psi: f64,
}

impl GigParams {
    pub fn new(p: f64, chi: f64, psi: f64) -> Result<Self> {
        let ok = p.is_finite()
            && chi.is_finite()
            && psi.is_finite()
            && chi >= 0.0
            && psi >= 0.0
            && !(chi == 0.0 && psi == 0.0)
            && !(p <= 0.0 && chi == 0.0)
            && !(p >= 0.0 && psi == 0.0);
        if !ok {
            return Err(Error::domain(format!("invalid GIG parameters p={p}, chi={chi}, psi={psi}")));
        }
        Ok(Self { p, chi, psi })
    }

    /// E[X^r] for the non-degenerate case chi, psi > 0.
    pub fn raw_moment(&self, r: f64) -> Result<f64> {
        if self.chi == 0.0 {
            // Gamma(p, psi/2)
            let rate = 0.5 * self.psi;
            return Ok((super::special::ln_gamma(self.p + r) - super::special::ln_gamma(self.p) - r * rate.ln()).exp());
        }
        if self.psi == 0.0 {
            let scale = 0.5 * self.chi;
            let a = -self.p;
            return Ok((super::special::ln_gamma(a - r) - super::special::ln_gamma(a) + r * scale.ln()).exp());
        }
        let w = (self.chi * self.psi).sqrt();
        let eta = (self.chi / self.psi).sqrt();
        Ok((r * eta.ln() + log_bessel_k(self.p + r, w)? - log_bessel_k(self.p, w)?).exp())
    }

    pub fn mean(&self) -> Result<f64> {
        self.raw_moment(1.0)
    }
}

pub fn sample_gig(params: GigParams, rng: &mut RngStream) -> Result<f64> {
    let GigParams { p, chi, psi } = GigParams::new(params.p, params.chi, params.psi)?;
    const ZTOL: f64 = 10.0 * f64::EPSILON;

    if chi < ZTOL && p > 0.0 {
        return Ok(positive(rng.gamma(p, 0.5 * psi)));
    }
    if chi < ZTOL && p < 0.0 {
        // mass sits at the chi scale, where the psi term is negligible
        return Ok(positive(1.0 / rng.gamma(-p, 0.5 * chi)));
    }
    if psi < ZTOL {
        return Ok(positive(1.0 / rng.gamma(-p, 0.5 * chi)));
    }

    let lambda = p.abs();
    let invert = p < 0.0;
    let alpha = (chi / psi).sqrt();
    let omega = (psi * chi).sqrt();

    let x = if lambda > 2.0 || omega > 3.0 {
        rou_shift(lambda, omega, rng)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        rou_noshift(lambda, omega, rng)
    } else {
        concave_split(lambda, omega, rng)
    };
    Ok(positive(if invert { alpha / x } else { alpha * x }))
}

// Keep draws strictly inside (0, inf) when extreme scales underflow.
fn positive(x: f64) -> f64 {
    x.clamp(f64::MIN_POSITIVE, f64::MAX)
}

fn mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn rou_noshift(lambda: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.uniform();
        let v = rng.uniform();
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn rou_shift(lambda: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // roots of the depressed cubic give the bounding rectangle
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();

    loop {
        let u = uminus + rng.uniform() * (uplus - uminus);
        let v = rng.uniform();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

// Requires 0 <= lambda < 1 and omega <= 1.
fn concave_split(lambda: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let xm = mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let atot = a0 + a1 + a2;

    loop {
        let mut v = atot * rng.uniform();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let a = if x0 > 2.0 / omega { x0 } else { 2.0 / omega };
                x = -2.0 / omega * ((-omega / 2.0 * a).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = rng.uniform() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}
