//! Exact Pólya-Gamma sampling.
//!
//! PG(1, c) draws use Devroye's alternating-series rejection sampler with a
//! truncated inverse-Gaussian / exponential proposal split at 0.64.
//! PG(b, c) for integer b is the sum of b independent PG(1, c) draws.

use std::f64::consts::PI;

use super::special::log_norm_cdf;
use super::RngStream;
use crate::error::{Error, Result};

const TRUNC: f64 = 0.64;
const TRUNC_RECIP: f64 = 1.0 / 0.64;

/// Parameters of PG(b, c): shape `b > 0`, tilt `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgParams {
    pub b: f64,
    pub c: f64,
}

impl PgParams {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::domain(format!("PG shape must be positive and finite, got {b}")));
        }
        if !c.is_finite() {
            return Err(Error::domain(format!("PG tilt must be finite, got {c}")));
        }
        Ok(Self { b, c })
    }

    pub fn mean(&self) -> f64 {
        let c = self.c.abs();
        if c < 1e-6 {
            self.b * (0.25 - c * c / 48.0)
        } else {
            self.b / (2.0 * c) * (0.5 * c).tanh()
        }
    }

    pub fn variance(&self) -> f64 {
        let c = self.c.abs();
        if c < 1e-3 {
            self.b * (1.0 / 24.0 - c * c / 240.0)
        } else {
            let ch = (0.5 * c).cosh();
            self.b / (4.0 * c * c * c) * (c.sinh() - c) / (ch * ch)
        }
    }
}

/// One draw from PG(b, c). Only integer shapes are supported.
pub fn sample_pg(params: PgParams, rng: &mut RngStream) -> Result<f64> {
    let PgParams { b, c } = PgParams::new(params.b, params.c)?;
    if b.fract() != 0.0 {
        return Err(Error::domain(format!("PG shape must be an integer for exact sampling, got {b}")));
    }
    let n = b as u64;
    Ok((0..n).map(|_| sample_pg1(c, rng)).sum())
}

/// One draw from PG(1, c).
pub fn sample_pg1(c: f64, rng: &mut RngStream) -> f64 {
    let z = 0.5 * c.abs();
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let p_expon = mass_texpon(z, fz);
    loop {
        let x = if rng.uniform() < p_expon {
            TRUNC + rng.exp1() / fz
        } else {
            truncated_inv_gauss(z, rng)
        };
        let mut s = coef(0, x);
        let y = rng.uniform() * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

// Probability of proposing from the exponential tail.
fn mass_texpon(z: f64, fz: f64) -> f64 {
    let t = TRUNC;
    let st = (1.0 / t).sqrt();
    let b = st * (t * z - 1.0);
    let a = -st * (t * z + 1.0);
    let x0 = fz.ln() + fz * t;
    let xb = x0 - z + log_norm_cdf(b);
    let xa = x0 + z + log_norm_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

// Inverse Gaussian IG(1/z, 1) truncated to (0, TRUNC).
fn truncated_inv_gauss(z: f64, rng: &mut RngStream) -> f64 {
    let t = TRUNC;
    if TRUNC_RECIP > z {
        loop {
            let (mut e1, mut e2) = (rng.exp1(), rng.exp1());
            while e1 * e1 > 2.0 * e2 / t {
                e1 = rng.exp1();
                e2 = rng.exp1();
            }
            let d = 1.0 + e1 * t;
            let x = t / (d * d);
            let alpha = (-0.5 * z * z * x).exp();
            if rng.uniform() <= alpha {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let y = rng.normal();
            let mu_y = mu * y * y;
            let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.uniform() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= t {
                return x;
            }
        }
    }
}

// n-th term of the alternating series for the J*(1, 0) density.
fn coef(n: u32, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let h = n as f64 + 0.5;
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * h * h / x).exp()
    } else {
        0.0
    }
}
