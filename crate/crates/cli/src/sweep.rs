//! Monte-Carlo sweeps over random binary triangles.
//!
//! For every sampled model the discrete optimum is known exactly (eight
//! labelings), so a grid of `(tau, alpha)` flow settings can be scored by
//! how often the rounded flow result reaches that optimum, how many
//! iterations it takes, and how often it times out. Samples are keyed by
//! `(seed, index)`, so every grid point sees the identical model set and the
//! aggregate is independent of batching or thread count.

use std::io::{self, Write};

use rayon::prelude::*;
use wam_core::flow::{solve, FlowParams, FlowStatus};
use wam_core::model::sample_triangle_model;
use wam_core::oracle::{k3_local_vertices, lp_local, lp_marginal};
use wam_core::{Error, Result};

use crate::sampling::model_rng;

/// Sweep protocol: sample count, seed, parameter grids, flow settings.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub samples: usize,
    pub seed: u64,
    pub tau_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub step: f64,
    pub entropy_threshold: f64,
    pub max_iters: usize,
    /// Relative energy error below which a run counts as successful.
    pub success_rel_tol: f64,
}

impl SweepConfig {
    /// Protocol defaults for the given sample count and seed: step 0.5,
    /// entropy threshold 1e-3, iteration cap 600, success tolerance 1%.
    pub fn new(samples: usize, seed: u64) -> Self {
        SweepConfig {
            samples,
            seed,
            tau_grid: Vec::new(),
            alpha_grid: Vec::new(),
            step: 0.5,
            entropy_threshold: 1e-3,
            max_iters: 600,
            success_rel_tol: 0.01,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid("sweep needs at least one sample"));
        }
        if self.tau_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::invalid("sweep grids must be non-empty"));
        }
        Ok(())
    }
}

/// Aggregate for one `(tau, alpha)` grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub tau: f64,
    pub alpha: f64,
    /// Fraction of samples whose rounded flow energy is within the success
    /// tolerance of the discrete optimum.
    pub success_rate: f64,
    /// Mean update count over all samples (timeouts count at the cap).
    pub avg_iterations: f64,
    /// Fraction of samples that hit the iteration cap.
    pub timeout_rate: f64,
}

/// Full sweep result: one record per grid point plus the distribution of
/// local-polytope optima over the twelve vertices.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    /// Fraction of samples whose local-polytope LP optimum was vertex `v`,
    /// indexed as in [`k3_local_vertices`] (integral first, fractional last).
    pub vertex_fractions: Vec<f64>,
}

/// Per-grid-point integer tallies; summing these is order-independent, so
/// parallel runs reproduce serial results exactly.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    successes: u64,
    timeouts: u64,
    iterations: u64,
}

#[derive(Debug, Clone)]
struct SampleOutcome {
    vertex_index: usize,
    tallies: Vec<Tally>,
}

fn grid_points(config: &SweepConfig) -> Vec<(f64, f64)> {
    let mut points = Vec::with_capacity(config.tau_grid.len() * config.alpha_grid.len());
    for &tau in &config.tau_grid {
        for &alpha in &config.alpha_grid {
            points.push((tau, alpha));
        }
    }
    points
}

fn run_sample(config: &SweepConfig, points: &[(f64, f64)], index: u64) -> Result<SampleOutcome> {
    let model = sample_triangle_model(&mut model_rng(config.seed, index));
    let optimum = lp_marginal(&model)?.value;
    let vertex_index = lp_local(&model)?.vertex_index;

    let mut tallies = vec![Tally::default(); points.len()];
    for (point, tally) in points.iter().zip(tallies.iter_mut()) {
        let (tau, alpha) = *point;
        let params = FlowParams {
            tau,
            alpha,
            step: config.step,
            entropy_threshold: config.entropy_threshold,
            max_iters: config.max_iters,
            ..FlowParams::default()
        };
        let result = solve(&model, &params)?;
        let energy = model.discrete_energy(&result.labeling);
        let tolerance = if optimum.abs() < 1e-6 {
            1e-6
        } else {
            config.success_rel_tol * optimum.abs()
        };
        if (energy - optimum).abs() <= tolerance {
            tally.successes = 1;
        }
        if result.status == FlowStatus::MaxIters {
            tally.timeouts = 1;
        }
        tally.iterations = result.iterations as u64;
    }
    Ok(SampleOutcome {
        vertex_index,
        tallies,
    })
}

/// Runs the sweep; samples execute in parallel, aggregation is exact.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let points = grid_points(config);
    let num_vertices = k3_local_vertices().len();

    let reduced: Result<(Vec<u64>, Vec<Tally>)> = (0..config.samples as u64)
        .into_par_iter()
        .map(|index| run_sample(config, &points, index))
        .try_fold(
            || (vec![0u64; num_vertices], vec![Tally::default(); points.len()]),
            |(mut vertices, mut tallies), outcome| {
                let outcome = outcome?;
                vertices[outcome.vertex_index] += 1;
                for (acc, t) in tallies.iter_mut().zip(outcome.tallies.iter()) {
                    acc.successes += t.successes;
                    acc.timeouts += t.timeouts;
                    acc.iterations += t.iterations;
                }
                Ok((vertices, tallies))
            },
        )
        .try_reduce(
            || (vec![0u64; num_vertices], vec![Tally::default(); points.len()]),
            |(mut va, mut ta), (vb, tb)| {
                for (a, b) in va.iter_mut().zip(vb.iter()) {
                    *a += b;
                }
                for (a, b) in ta.iter_mut().zip(tb.iter()) {
                    a.successes += b.successes;
                    a.timeouts += b.timeouts;
                    a.iterations += b.iterations;
                }
                Ok((va, ta))
            },
        );
    let (vertex_counts, tallies) = reduced?;

    let n = config.samples as f64;
    let records = points
        .iter()
        .zip(tallies.iter())
        .map(|(&(tau, alpha), tally)| SweepRecord {
            tau,
            alpha,
            success_rate: tally.successes as f64 / n,
            avg_iterations: tally.iterations as f64 / n,
            timeout_rate: tally.timeouts as f64 / n,
        })
        .collect();
    let vertex_fractions = vertex_counts.iter().map(|&c| c as f64 / n).collect();
    Ok(SweepOutcome {
        records,
        vertex_fractions,
    })
}

/// Formats with six significant digits in plain decimal notation.
pub fn six_significant(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes the fixed CSV schema: a header, one row per grid point, and a
/// trailing comment with the twelve local-vertex fractions.
pub fn write_sweep_csv<W: Write>(outcome: &SweepOutcome, out: &mut W) -> io::Result<()> {
    writeln!(out, "tau,alpha,success_rate,avg_iterations,timeout_rate")?;
    for r in &outcome.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            six_significant(r.tau),
            six_significant(r.alpha),
            six_significant(r.success_rate),
            six_significant(r.avg_iterations),
            six_significant(r.timeout_rate)
        )?;
    }
    let fractions: Vec<String> = outcome
        .vertex_fractions
        .iter()
        .map(|&v| six_significant(v))
        .collect();
    writeln!(out, "# local_vertex_fractions: {}", fractions.join(","))?;
    Ok(())
}
