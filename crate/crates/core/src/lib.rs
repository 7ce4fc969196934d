//! Bayesian mixture-of-experts models with a normal-gamma shrinkage prior on
//! the multinomial-logit gating network.
//!
//! The crate covers Pólya-Gamma Gibbs sampling with random permutation
//! ([`gibbs`]), k-means identification of the permuted draws ([`ident`]),
//! bridge-sampling marginal likelihoods ([`marglik`]) and the simulation
//! studies used to compare gating priors ([`bench`]).

pub mod bench;
pub mod error;
pub mod gibbs;
pub mod ident;
pub mod marglik;
pub mod model;
pub mod randkit;

pub use error::{Error, Result};
pub use nalgebra;
