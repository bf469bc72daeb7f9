//! Finite-difference validation of analytic derivatives.
//!
//! Two layers are checked independently on random instances: the per-edge
//! messages (the two gradients of the smoothed edge distance in its endpoint
//! marginals) and the assembled energy gradient on a triangle model. Both
//! are compared against central differences along the simplex tangent basis
//! `e_k - e_0`; the inner solver runs at a much tighter tolerance than the
//! differencing step so solver noise cannot masquerade as gradient error.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wam_core::flow::{energy_gradient, smoothed_energy, FlowParams};
use wam_core::model::{triangle_graph, GraphicalModel};
use wam_core::transport::{smoothed_edge_distance, wasserstein_message, SinkhornParams};
use wam_core::{AssignmentMatrix, Error, Result};

use crate::sampling::model_rng;

/// Check protocol.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub num_labels: usize,
    pub tau: f64,
    pub trials: usize,
    pub seed: u64,
    /// Central-difference step.
    pub fd_step: f64,
    /// Largest acceptable relative error.
    pub tolerance: f64,
}

impl GradCheckConfig {
    pub fn new(num_labels: usize, tau: f64, trials: usize, seed: u64) -> Self {
        GradCheckConfig {
            num_labels,
            tau,
            trials,
            seed,
            fd_step: 1e-4,
            tolerance: 1e-3,
        }
    }
}

/// Worst relative errors observed across all trials.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub message_max_rel: f64,
    pub gradient_max_rel: f64,
    pub trials: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.message_max_rel <= self.tolerance && self.gradient_max_rel <= self.tolerance
    }
}

fn inner_params(tau: f64, max_abs_cost: f64) -> SinkhornParams {
    SinkhornParams {
        tolerance: 1e-11,
        max_iters: 100_000,
        log_domain: tau < 0.02 * max_abs_cost,
    }
}

/// Strictly interior distribution with entries bounded away from zero.
fn random_interior(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

fn random_costs(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Compares analytic tangent coefficients against central differences of
/// `value`. Both `analytic` and the differencing run along `e_k - e_0`.
fn basis_relative_error(
    analytic: &[f64],
    mut value: impl FnMut(usize, f64) -> Result<f64>,
    fd_step: f64,
) -> Result<f64> {
    let n = analytic.len();
    let mut worst_abs = 0.0f64;
    let mut scale = 0.0f64;
    for k in 1..n {
        let an = analytic[k] - analytic[0];
        let plus = value(k, fd_step)?;
        let minus = value(k, -fd_step)?;
        let fd = (plus - minus) / (2.0 * fd_step);
        worst_abs = worst_abs.max((fd - an).abs());
        scale = scale.max(an.abs());
    }
    Ok(worst_abs / scale.max(1e-9))
}

/// Perturbs `base[k] += eps`, `base[0] -= eps`.
fn shifted(base: &[f64], k: usize, eps: f64) -> Vec<f64> {
    let mut out = base.to_vec();
    out[k] += eps;
    out[0] -= eps;
    out
}

fn check_messages(config: &GradCheckConfig, trial: u64) -> Result<f64> {
    let n = config.num_labels;
    let mut rng = model_rng(config.seed, trial);
    let theta = random_costs(&mut rng, n * n);
    let mu1 = random_interior(&mut rng, n);
    let mu2 = random_interior(&mut rng, n);
    let max_abs = theta.iter().fold(0.0f64, |a, &t| a.max(t.abs()));
    let params = inner_params(config.tau, max_abs);

    let message = wasserstein_message(&theta, &mu1, &mu2, config.tau, &params)?;
    let first = basis_relative_error(
        &message.to_first,
        |k, eps| smoothed_edge_distance(&theta, &shifted(&mu1, k, eps), &mu2, config.tau, &params),
        config.fd_step,
    )?;
    let second = basis_relative_error(
        &message.to_second,
        |k, eps| smoothed_edge_distance(&theta, &mu1, &shifted(&mu2, k, eps), config.tau, &params),
        config.fd_step,
    )?;
    Ok(first.max(second))
}

fn check_energy_gradient(config: &GradCheckConfig, trial: u64) -> Result<f64> {
    let n = config.num_labels;
    // Offset the key stream so the model differs from the message instance.
    let mut rng = model_rng(config.seed ^ 0x5CA1_AB1E, trial);
    let unaries: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let pairwise: Vec<Vec<f64>> = (0..3).map(|_| random_costs(&mut rng, n * n)).collect();
    let model = GraphicalModel::new(triangle_graph(), n, unaries, pairwise)?;
    let rows: Vec<Vec<f64>> = (0..3).map(|_| random_interior(&mut rng, n)).collect();
    let w = AssignmentMatrix::from_rows(&rows)?;

    let mut params = FlowParams {
        tau: config.tau,
        ..FlowParams::default()
    };
    params.sinkhorn = inner_params(config.tau, model.max_abs_pairwise());

    let grad = energy_gradient(&model, &w, &params)?;
    let mut worst = 0.0f64;
    for i in 0..3 {
        let rel = basis_relative_error(
            &grad[i * n..(i + 1) * n],
            |k, eps| {
                let mut rows = rows.clone();
                rows[i] = shifted(&rows[i], k, eps);
                smoothed_energy(&model, &AssignmentMatrix::from_rows(&rows)?, &params)
            },
            config.fd_step,
        )?;
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Runs both checks over all trials and reports the worst errors.
pub fn run_gradcheck(config: &GradCheckConfig) -> Result<GradCheckReport> {
    if config.num_labels < 2 {
        return Err(Error::invalid("gradient check needs at least two labels"));
    }
    if config.trials == 0 {
        return Err(Error::invalid("gradient check needs at least one trial"));
    }
    let mut message_max_rel = 0.0f64;
    let mut gradient_max_rel = 0.0f64;
    for trial in 0..config.trials as u64 {
        message_max_rel = message_max_rel.max(check_messages(config, trial)?);
        gradient_max_rel = gradient_max_rel.max(check_energy_gradient(config, trial)?);
    }
    Ok(GradCheckReport {
        message_max_rel,
        gradient_max_rel,
        trials: config.trials,
        tolerance: config.tolerance,
    })
}
