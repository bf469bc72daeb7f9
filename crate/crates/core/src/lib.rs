//! Labeling of pairwise graphical models by smoothed-transport descent.
//!
//! A model assigns each node of a graph one of `n` labels; its quality is a
//! discrete energy built from per-node label costs and per-edge label-pair
//! costs. This crate relaxes the labeling set to the manifold of strictly
//! positive row-stochastic matrices and minimizes a smoothed surrogate
//! energy whose pairwise terms are entropy-smoothed transport distances
//! between the endpoint label distributions. The minimization runs as a
//! multiplicative flow that drives every row toward a vertex of the simplex,
//! so the final state rounds to a labeling essentially for free.
//!
//! Module map:
//!
//! * [`simplex`] — geometry of the positive simplex and the assignment
//!   manifold: tangent projection, exponential-type charts, entropy,
//!   boundary safeguards.
//! * [`model`] — graphs, cost tables, discrete energies, grid and triangle
//!   builders, a reference sampler for random binary triangles.
//! * [`model_io`] — a plain-text model format with exact round-tripping.
//! * [`image`] — PGM/PPM pixmaps, palettes, and image-to-model assembly for
//!   label-smoothing benchmarks.
//! * [`transport`] — entropy-smoothed transport between label
//!   distributions: matrix-scaling and log-domain solvers, dual potentials,
//!   the messages edges send to their endpoints.
//! * [`flow`] — the descent loop: energy gradients assembled from edge
//!   messages, multiplicative updates, convergence tracking, traces.
//! * [`oracle`] — exhaustive and polytope-based exact solvers used to
//!   certify everything else.

pub mod error;
pub mod flow;
pub mod image;
pub mod model;
pub mod model_io;
pub mod oracle;
pub mod simplex;
pub mod transport;

pub use error::{Error, Result};
pub use flow::{
    apply_update, energy_gradient, flow_step, rounded_energy, smoothed_energy, solve, solve_with,
    FlowParams, FlowResult, FlowStatus, FlowTrace, TraceOptions, TraceRow,
};
pub use model::{Graph, GraphicalModel, Neighborhood};
pub use simplex::AssignmentMatrix;
pub use transport::{
    dual_objective, sinkhorn, smoothed_edge_distance, wasserstein_message, EdgeMessage,
    SinkhornParams, SinkhornSolution,
};
