//! Monte Carlo evaluation: generators, metrics, classifiers and the runner.

pub mod csp;
pub mod generators;
pub mod lda;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod sampling;
