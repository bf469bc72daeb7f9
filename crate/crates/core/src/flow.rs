//! Smoothed-energy minimization over the assignment manifold.
//!
//! The objective couples per-node label costs with smoothed transport
//! distances along the edges:
//!
//! ```text
//! E(W) = sum_i <theta_i, W_i> + sum_(i,j) d(W_i, W_j)
//! ```
//!
//! where each `W_i` is a strictly positive label distribution and `d` is the
//! entropy-smoothed edge distance from [`crate::transport`]. Its gradient at
//! node `i` is the tangent projection of the node cost plus one dual
//! potential per incident edge. The state is advanced by a multiplicative
//! update evaluated in the log domain,
//!
//! ```text
//! W_i  <-  normalize( W_i^(1 + alpha) * exp(-step * grad_i) )
//! ```
//!
//! whose `alpha` term sharpens the current iterate toward a vertex while the
//! gradient term steers it. Iteration stops when the normalized entropy of
//! the state falls below a threshold, i.e. when every row has effectively
//! committed to one label.

use std::io;

use crate::error::{Error, Result};
use crate::model::GraphicalModel;
use crate::simplex::{check_distribution, project_tangent_in_place, AssignmentMatrix};
use crate::transport::{EdgeSolve, Kernel, SinkhornParams};

/// Any gradient entry beyond this magnitude aborts the run as divergent.
const DIVERGENCE_LIMIT: f64 = 1e6;

/// Edge count from which per-iteration edge solves run on the thread pool.
const PARALLEL_EDGE_THRESHOLD: usize = 64;

/// Parameters of the minimization loop.
#[derive(Debug, Clone)]
pub struct FlowParams {
    /// Smoothing strength of the edge distances.
    pub tau: f64,
    /// Sharpening exponent of the multiplicative update (`>= 0`).
    pub alpha: f64,
    /// Gradient step size.
    pub step: f64,
    /// Convergence threshold on the normalized entropy of the state.
    pub entropy_threshold: f64,
    /// Iteration budget; exceeding it yields [`FlowStatus::MaxIters`].
    pub max_iters: usize,
    /// Lower bound kept between state entries and the simplex boundary.
    pub epsilon_floor: f64,
    /// Inner transport-solver settings.
    pub sinkhorn: SinkhornParams,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            tau: 0.1,
            alpha: 0.5,
            step: 0.1,
            entropy_threshold: 1e-4,
            max_iters: 10_000,
            epsilon_floor: 1e-10,
            sinkhorn: SinkhornParams::default(),
        }
    }
}

impl FlowParams {
    fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(format!(
                "smoothing parameter tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid(format!(
                "sharpening exponent alpha must be nonnegative, got {}",
                self.alpha
            )));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid(format!(
                "step size must be positive, got {}",
                self.step
            )));
        }
        if !(self.entropy_threshold.is_finite()
            && self.entropy_threshold >= 0.0
            && self.entropy_threshold < 1.0)
        {
            return Err(Error::invalid(format!(
                "entropy threshold must lie in [0, 1), got {}",
                self.entropy_threshold
            )));
        }
        if !(self.epsilon_floor.is_finite()
            && self.epsilon_floor > 0.0
            && self.epsilon_floor <= 1e-2)
        {
            return Err(Error::invalid(format!(
                "boundary floor must lie in (0, 1e-2], got {}",
                self.epsilon_floor
            )));
        }
        Ok(())
    }
}

/// What to record per iteration beyond entropy and state change.
#[derive(Debug, Clone, Default)]
pub struct TraceOptions {
    /// Record the basic per-iteration rows (iteration, normalized entropy,
    /// state change) even when no optional column is requested.
    pub record: bool,
    /// Evaluate the smoothed energy each iteration (one extra transport
    /// solve per edge and iteration).
    pub record_smoothed_energy: bool,
    /// Evaluate the discrete energy of the rounded state each iteration.
    pub record_rounded_energy: bool,
    /// Record the largest marginal violation among the edge solves.
    pub check_marginals: bool,
}

/// One recorded iteration. Row 0 describes the initial state; row `k`
/// describes the state after update `k`.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: usize,
    pub normalized_entropy: f64,
    pub smoothed_energy: Option<f64>,
    pub rounded_energy: Option<f64>,
    /// Largest absolute entry change produced by this iteration's update
    /// (zero in row 0).
    pub max_row_change: f64,
    /// Largest L1 marginal violation among this iteration's edge solves.
    pub max_marginal_residual: Option<f64>,
}

/// Recorded history of a run.
#[derive(Debug, Clone, Default)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
}

impl FlowTrace {
    /// Writes `iter,norm_entropy[,e_tau][,rounded_energy]`; the optional
    /// columns appear when the corresponding values were recorded.
    pub fn write_csv<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        let has_energy = self.rows.first().is_some_and(|r| r.smoothed_energy.is_some());
        let has_rounded = self.rows.first().is_some_and(|r| r.rounded_energy.is_some());
        let mut header = String::from("iter,norm_entropy");
        if has_energy {
            header.push_str(",e_tau");
        }
        if has_rounded {
            header.push_str(",rounded_energy");
        }
        writeln!(out, "{header}")?;
        for row in &self.rows {
            write!(out, "{},{}", row.iteration, row.normalized_entropy)?;
            if has_energy {
                write!(out, ",{}", row.smoothed_energy.unwrap_or(f64::NAN))?;
            }
            if has_rounded {
                write!(out, ",{}", row.rounded_energy.unwrap_or(f64::NAN))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    /// Normalized entropy fell below the threshold.
    Converged,
    /// Iteration budget exhausted first.
    MaxIters,
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct FlowResult {
    /// Final (strictly positive) assignment state.
    pub assignment: AssignmentMatrix,
    /// Row-wise most probable labels of the final state.
    pub labeling: Vec<usize>,
    /// Update steps performed.
    pub iterations: usize,
    pub status: FlowStatus,
    /// Present when tracing was requested.
    pub trace: Option<FlowTrace>,
}

fn check_state(model: &GraphicalModel, w: &AssignmentMatrix) -> Result<()> {
    if w.num_nodes() != model.graph().num_nodes() || w.num_labels() != model.num_labels() {
        return Err(Error::invalid(format!(
            "state is {} x {}, model needs {} x {}",
            w.num_nodes(),
            w.num_labels(),
            model.graph().num_nodes(),
            model.num_labels()
        )));
    }
    for i in 0..w.num_nodes() {
        check_distribution(w.row(i))?;
    }
    Ok(())
}

/// Per-run solver state: one kernel per edge plus warm-start duals carried
/// across iterations.
struct FlowEngine<'a> {
    model: &'a GraphicalModel,
    params: &'a FlowParams,
    kernels: Vec<Kernel>,
    warm: Vec<Option<Vec<f64>>>,
}

impl<'a> FlowEngine<'a> {
    fn new(model: &'a GraphicalModel, params: &'a FlowParams) -> Result<FlowEngine<'a>> {
        params.validate()?;
        let n = model.num_labels();
        let kernels: Result<Vec<Kernel>> = (0..model.graph().num_edges())
            .map(|e| Kernel::new(model.pairwise(e), n, n, params.tau, params.sinkhorn.log_domain))
            .collect();
        let kernels = kernels?;
        let warm = vec![None; kernels.len()];
        Ok(FlowEngine {
            model,
            params,
            kernels,
            warm,
        })
    }

    /// Solves every edge problem at the current state, then refreshes the
    /// warm-start cache. Accumulation order over edges stays fixed even when
    /// the solves themselves run in parallel.
    fn edge_solves(&mut self, w: &AssignmentMatrix) -> Result<Vec<EdgeSolve>> {
        let graph = self.model.graph();
        let tau = self.params.tau;
        let sk = &self.params.sinkhorn;
        let solves: Result<Vec<EdgeSolve>> = if graph.num_edges() >= PARALLEL_EDGE_THRESHOLD {
            use rayon::prelude::*;
            self.kernels
                .par_iter()
                .enumerate()
                .map(|(e, kernel)| {
                    let (i, j) = graph.edge(e);
                    kernel.solve(w.row(i), w.row(j), tau, sk, self.warm[e].as_deref())
                })
                .collect()
        } else {
            self.kernels
                .iter()
                .enumerate()
                .map(|(e, kernel)| {
                    let (i, j) = graph.edge(e);
                    kernel.solve(w.row(i), w.row(j), tau, sk, self.warm[e].as_deref())
                })
                .collect()
        };
        let solves = solves?;
        for (slot, solve) in self.warm.iter_mut().zip(solves.iter()) {
            *slot = Some(solve.dual2.clone());
        }
        Ok(solves)
    }

    /// Full energy gradient: per row, the tangent projection of the node
    /// cost plus the dual potentials of all incident edges. Also reports the
    /// largest marginal violation among the edge solves.
    fn gradient(&mut self, w: &AssignmentMatrix, iteration: usize) -> Result<(Vec<f64>, f64)> {
        let solves = self.edge_solves(w)?;
        let (m, n) = (w.num_nodes(), w.num_labels());
        let mut grad = vec![0.0; m * n];
        for i in 0..m {
            grad[i * n..(i + 1) * n].copy_from_slice(self.model.unary(i));
        }
        for (e, solve) in solves.iter().enumerate() {
            let (i, j) = self.model.graph().edge(e);
            for (g, d) in grad[i * n..(i + 1) * n].iter_mut().zip(solve.dual1.iter()) {
                *g += d;
            }
            for (g, d) in grad[j * n..(j + 1) * n].iter_mut().zip(solve.dual2.iter()) {
                *g += d;
            }
        }
        for i in 0..m {
            project_tangent_in_place(&mut grad[i * n..(i + 1) * n]);
        }
        for i in 0..m {
            for k in 0..n {
                let g = grad[i * n + k];
                if !g.is_finite() || g.abs() > DIVERGENCE_LIMIT {
                    return Err(Error::Diverged {
                        iteration,
                        node: i,
                        magnitude: g.abs(),
                    });
                }
            }
        }
        let residual = solves.iter().map(|s| s.residual).fold(0.0f64, f64::max);
        Ok((grad, residual))
    }

    /// Smoothed energy of a state: node costs plus per-edge transport costs.
    fn energy(&mut self, w: &AssignmentMatrix) -> Result<f64> {
        let solves = self.edge_solves(w)?;
        let tau = self.params.tau;
        let mut total = 0.0;
        for i in 0..w.num_nodes() {
            total += self
                .model
                .unary(i)
                .iter()
                .zip(w.row(i).iter())
                .map(|(&t, &p)| t * p)
                .sum::<f64>();
        }
        for (kernel, solve) in self.kernels.iter().zip(solves.iter()) {
            let coupling = kernel.coupling_from_duals(&solve.dual1, &solve.dual2, tau);
            total += kernel.primal_value(&coupling, tau);
        }
        Ok(total)
    }
}

/// Gradient of the smoothed energy at `w`, flattened row-major
/// (`num_nodes * num_labels`); every row lies in the tangent space.
pub fn energy_gradient(
    model: &GraphicalModel,
    w: &AssignmentMatrix,
    params: &FlowParams,
) -> Result<Vec<f64>> {
    check_state(model, w)?;
    let mut engine = FlowEngine::new(model, params)?;
    let (grad, _) = engine.gradient(w, 0)?;
    Ok(grad)
}

/// Smoothed energy `sum_i <theta_i, W_i> + sum_(i,j) d(W_i, W_j)` at `w`.
pub fn smoothed_energy(
    model: &GraphicalModel,
    w: &AssignmentMatrix,
    params: &FlowParams,
) -> Result<f64> {
    check_state(model, w)?;
    let mut engine = FlowEngine::new(model, params)?;
    engine.energy(w)
}

/// Discrete energy of the row-wise argmax rounding of `w`.
pub fn rounded_energy(model: &GraphicalModel, w: &AssignmentMatrix) -> f64 {
    model.discrete_energy(&w.argmax_labeling())
}

/// One multiplicative update, evaluated in the log domain so that large
/// gradients cannot overflow and constant gradient shifts cancel exactly:
/// per row, `w' = normalize(exp((1 + alpha) ln w - step * grad))`.
pub fn apply_update(
    w: &AssignmentMatrix,
    grad: &[f64],
    alpha: f64,
    step: f64,
) -> AssignmentMatrix {
    let (m, n) = (w.num_nodes(), w.num_labels());
    assert_eq!(grad.len(), m * n, "gradient shape mismatch");
    let mut out = w.clone();
    let mut y = vec![0.0; n];
    for i in 0..m {
        let row = out.row_mut(i);
        for k in 0..n {
            y[k] = (1.0 + alpha) * row[k].ln() - step * grad[i * n + k];
        }
        let max = y.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for k in 0..n {
            y[k] = (y[k] - max).exp();
            sum += y[k];
        }
        for k in 0..n {
            row[k] = y[k] / sum;
        }
    }
    out
}

/// One full iteration from an arbitrary valid state: gradient, multiplicative
/// update, boundary safeguard. Builds solver state from scratch; the loop in
/// [`solve_with`] reuses kernels and warm starts instead.
pub fn flow_step(
    model: &GraphicalModel,
    w: &AssignmentMatrix,
    params: &FlowParams,
) -> Result<AssignmentMatrix> {
    let grad = energy_gradient(model, w, params)?;
    let mut next = apply_update(w, &grad, params.alpha, params.step);
    next.safeguard(params.epsilon_floor);
    Ok(next)
}

/// Runs the flow from the barycenter without tracing.
pub fn solve(model: &GraphicalModel, params: &FlowParams) -> Result<FlowResult> {
    solve_with(model, params, None, &TraceOptions::default())
}

/// Runs the flow from `initial` (barycenter when `None`). A trace is
/// recorded into the result when any [`TraceOptions`] flag is set.
pub fn solve_with(
    model: &GraphicalModel,
    params: &FlowParams,
    initial: Option<AssignmentMatrix>,
    trace_options: &TraceOptions,
) -> Result<FlowResult> {
    let mut engine = FlowEngine::new(model, params)?;
    let mut w = match initial {
        Some(state) => {
            check_state(model, &state)?;
            state
        }
        None => AssignmentMatrix::barycenter(model.graph().num_nodes(), model.num_labels()),
    };

    let tracing = trace_options.record
        || trace_options.record_smoothed_energy
        || trace_options.record_rounded_energy
        || trace_options.check_marginals;
    let mut trace = FlowTrace::default();
    let record = |trace: &mut FlowTrace,
                  engine: &mut FlowEngine,
                  w: &AssignmentMatrix,
                  iteration: usize,
                  change: f64,
                  residual: Option<f64>|
     -> Result<()> {
        let smoothed = if trace_options.record_smoothed_energy {
            Some(engine.energy(w)?)
        } else {
            None
        };
        let rounded = if trace_options.record_rounded_energy {
            Some(rounded_energy(engine.model, w))
        } else {
            None
        };
        trace.rows.push(TraceRow {
            iteration,
            normalized_entropy: w.normalized_entropy(),
            smoothed_energy: smoothed,
            rounded_energy: rounded,
            max_row_change: change,
            max_marginal_residual: residual,
        });
        Ok(())
    };

    record(&mut trace, &mut engine, &w, 0, 0.0, None)?;

    let mut iterations = 0;
    let mut status = FlowStatus::MaxIters;
    if w.normalized_entropy() < params.entropy_threshold {
        status = FlowStatus::Converged;
    } else {
        for it in 1..=params.max_iters {
            let (grad, residual) = engine.gradient(&w, it)?;
            let mut next = apply_update(&w, &grad, params.alpha, params.step);
            next.safeguard(params.epsilon_floor);
            let change = w.max_abs_change(&next);
            w = next;
            iterations = it;
            record(
                &mut trace,
                &mut engine,
                &w,
                it,
                change,
                trace_options.check_marginals.then_some(residual),
            )?;
            if w.normalized_entropy() < params.entropy_threshold {
                status = FlowStatus::Converged;
                break;
            }
        }
    }

    let labeling = w.argmax_labeling();
    Ok(FlowResult {
        assignment: w,
        labeling,
        iterations,
        status,
        trace: tracing.then_some(trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{potts_matrix, triangle_graph, Graph, GraphicalModel};
    use crate::simplex::{barycenter, AssignmentMatrix};

    fn two_node_agreement_model() -> GraphicalModel {
        // Both nodes prefer label 0 and the edge rewards agreement; the
        // unique optimum is (0, 0) with energy 0.
        let graph = Graph::new(2, vec![(0, 1)]).unwrap();
        GraphicalModel::new(
            graph,
            2,
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![potts_matrix(2, 1.0)],
        )
        .unwrap()
    }

    fn costless_triangle() -> GraphicalModel {
        GraphicalModel::new(
            triangle_graph(),
            2,
            vec![vec![0.0; 2]; 3],
            vec![vec![0.0; 4]; 3],
        )
        .unwrap()
    }

    #[test]
    fn barycenter_is_a_fixed_point_of_the_costless_model() {
        // With all costs zero every message vanishes, and the log-domain
        // update maps a uniform row to itself bit for bit.
        let model = costless_triangle();
        let params = FlowParams {
            max_iters: 5,
            ..FlowParams::default()
        };
        let start = AssignmentMatrix::barycenter(3, 2);
        let mut w = start.clone();
        for _ in 0..3 {
            w = flow_step(&model, &w, &params).unwrap();
            assert_eq!(w, start);
        }
        let result = solve(&model, &params).unwrap();
        assert_eq!(result.status, FlowStatus::MaxIters);
        assert_eq!(result.assignment, start);
    }

    #[test]
    fn two_node_agreement_converges_to_the_optimum() {
        let model = two_node_agreement_model();
        let params = FlowParams {
            entropy_threshold: 1e-3,
            ..FlowParams::default()
        };
        let result = solve(&model, &params).unwrap();
        assert_eq!(result.status, FlowStatus::Converged);
        assert_eq!(result.labeling, vec![0, 0]);
        assert_eq!(rounded_energy(&model, &result.assignment), 0.0);
        assert!(result.assignment.row(0)[0] > 0.99);
    }

    #[test]
    fn single_node_model_is_mirror_descent_on_one_simplex() {
        let graph = Graph::new(1, vec![]).unwrap();
        let model = GraphicalModel::new(graph, 3, vec![vec![2.0, 0.5, 1.0]], vec![]).unwrap();
        let result = solve(&model, &FlowParams::default()).unwrap();
        assert_eq!(result.status, FlowStatus::Converged);
        assert_eq!(result.labeling, vec![1]);
    }

    #[test]
    fn oversized_gradient_reports_divergence() {
        let graph = Graph::new(1, vec![]).unwrap();
        let model = GraphicalModel::new(graph, 2, vec![vec![3.0e6, 0.0]], vec![]).unwrap();
        let w = AssignmentMatrix::barycenter(1, 2);
        let err = energy_gradient(&model, &w, &FlowParams::default()).unwrap_err();
        match err {
            Error::Diverged {
                node, magnitude, ..
            } => {
                assert_eq!(node, 0);
                assert!(magnitude > 1e6);
            }
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn update_ignores_constant_gradient_shifts() {
        let w = AssignmentMatrix::from_rows(&[vec![0.6, 0.3, 0.1]]).unwrap();
        let grad = vec![0.4, -1.2, 0.8];
        let shifted: Vec<f64> = grad.iter().map(|g| g + 7.5).collect();
        let a = apply_update(&w, &grad, 0.5, 0.7);
        let b = apply_update(&w, &shifted, 0.5, 0.7);
        for (x, y) in a.as_slice().iter().zip(b.as_slice().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn update_is_log_linear_in_the_tangent_space() {
        // The tangent projection of log(updated row) equals
        // (1 + alpha) * P(log row) - step * P(grad) to machine precision.
        let w = AssignmentMatrix::from_rows(&[vec![0.25, 0.55, 0.2]]).unwrap();
        let grad = vec![0.3, -0.9, 0.6];
        let (alpha, step) = (0.37, 0.42);
        let next = apply_update(&w, &grad, alpha, step);

        let p = |v: &[f64]| crate::simplex::project_tangent(v).unwrap();
        let logs: Vec<f64> = w.row(0).iter().map(|&x| x.ln()).collect();
        let new_logs: Vec<f64> = next.row(0).iter().map(|&x| x.ln()).collect();
        let lhs = p(&new_logs);
        let expected: Vec<f64> = p(&logs)
            .iter()
            .zip(p(&grad).iter())
            .map(|(&l, &g)| (1.0 + alpha) * l - step * g)
            .collect();
        for (a, b) in lhs.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn pure_gradient_updates_decrease_the_smoothed_energy() {
        let model = two_node_agreement_model();
        let params = FlowParams {
            alpha: 0.0,
            step: 0.01,
            ..FlowParams::default()
        };
        let mut w = AssignmentMatrix::barycenter(2, 2);
        let mut prev = smoothed_energy(&model, &w, &params).unwrap();
        for _ in 0..50 {
            w = flow_step(&model, &w, &params).unwrap();
            let e = smoothed_energy(&model, &w, &params).unwrap();
            assert!(e <= prev + 1e-9, "{e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn trace_rows_follow_the_iteration_structure() {
        let model = two_node_agreement_model();
        let params = FlowParams {
            entropy_threshold: 1e-3,
            ..FlowParams::default()
        };
        let options = TraceOptions {
            record_smoothed_energy: true,
            record_rounded_energy: true,
            check_marginals: true,
            ..TraceOptions::default()
        };
        let result = solve_with(&model, &params, None, &options).unwrap();
        let trace = result.trace.unwrap();
        assert_eq!(trace.rows.len(), result.iterations + 1);
        let first = &trace.rows[0];
        assert_eq!(first.iteration, 0);
        assert!((first.normalized_entropy - 1.0).abs() < 1e-12);
        assert_eq!(first.max_row_change, 0.0);
        for (k, row) in trace.rows.iter().enumerate() {
            assert_eq!(row.iteration, k);
            assert!(row.smoothed_energy.is_some());
            assert!(row.rounded_energy.is_some());
        }
        for row in &trace.rows[1..] {
            assert!(row.max_marginal_residual.unwrap() <= params.sinkhorn.tolerance);
        }
        // Smoothed energy is minimized smoothly; the final rounded energy is
        // the discrete optimum.
        assert_eq!(trace.rows.last().unwrap().rounded_energy.unwrap(), 0.0);

        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,norm_entropy,e_tau,rounded_energy");
        assert!(text.lines().count() == trace.rows.len() + 1);
        let first_row = lines.next().unwrap();
        assert!(first_row.starts_with("0,1"), "{first_row}");
    }

    #[test]
    fn iteration_budget_yields_max_iters_status() {
        let model = two_node_agreement_model();
        let params = FlowParams {
            max_iters: 1,
            ..FlowParams::default()
        };
        let result = solve(&model, &params).unwrap();
        assert_eq!(result.status, FlowStatus::MaxIters);
        assert_eq!(result.iterations, 1);
    }

    #[test]
    fn rejects_mismatched_initial_state() {
        let model = two_node_agreement_model();
        let bad = AssignmentMatrix::barycenter(3, 2);
        assert!(
            solve_with(&model, &FlowParams::default(), Some(bad), &TraceOptions::default())
                .is_err()
        );
        let not_normalized =
            AssignmentMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).map(|mut m| {
                m.row_mut(0)[0] = 0.9;
                m
            });
        assert!(solve_with(
            &model,
            &FlowParams::default(),
            Some(not_normalized.unwrap()),
            &TraceOptions::default()
        )
        .is_err());
    }

    #[test]
    fn barycenter_helper_matches_matrix_constructor() {
        let w = AssignmentMatrix::barycenter(2, 4);
        for i in 0..2 {
            assert_eq!(w.row(i), barycenter(4).as_slice());
        }
    }
}
