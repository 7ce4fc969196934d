//! Marginal likelihood estimation by bridge sampling with an importance
//! density built from stored full-conditional moments.

mod bridge;
mod snapshot;
mod table;

pub use bridge::{
    bridge_estimate, bridge_from_store, bridge_recursion, draw_importance, log_q, BridgeAudit, BridgeResult,
    BridgeSettings, PosteriorTarget, ThetaDraw,
};
pub use snapshot::ImportanceSnapshot;
pub use table::{conjugate_bernoulli_log_ml, marglik_for_k, MarglikRow};

use crate::error::{Error, Result};

/// Numerically stable log Σ exp(v). All −∞ inputs give −∞.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("logsumexp of an empty slice".into()));
    }
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return Ok(m);
    }
    Ok(m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_examples() {
        assert!((logsumexp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((logsumexp(&[1000.0, 1000.0]).unwrap() - 1000.0 - 2f64.ln()).abs() < 1e-12);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY, 0.0]).unwrap(), 0.0);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(logsumexp(&[]), Err(Error::Empty(_))));
    }
}
