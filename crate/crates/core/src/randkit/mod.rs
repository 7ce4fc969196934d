//! Random-variate generation and special functions used by the sampler.

mod gig;
mod pg;
mod rng;
pub mod special;

pub use gig::{sample_gig, GigParams};
pub use pg::{sample_pg, sample_pg1, PgParams};
pub use rng::RngStream;
pub use special::{bessel_k, log_bessel_k};
