//! Simulation-study harness: generators, metrics and prior comparisons.

mod gen;
mod metrics;
mod study;

pub use gen::*;
pub use metrics::*;
pub use study::*;
