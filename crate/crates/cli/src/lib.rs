//! Harness library behind the `wam` binary: deterministic sampling, the
//! fixed triangle study, Monte-Carlo parameter sweeps, finite-difference
//! self-checks, and the synthetic five-region labeling benchmark.

pub mod gradcheck;
pub mod regions;
pub mod sampling;
pub mod sweep;
pub mod triangle;
