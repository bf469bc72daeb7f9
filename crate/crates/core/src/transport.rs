//! Entropy-smoothed transport between label distributions along an edge.
//!
//! For an edge cost matrix `theta` (n1 x n2) and marginals `mu1`, `mu2`, the
//! smoothed edge distance is
//!
//! ```text
//! d(mu1, mu2) = min { <theta, M> - tau * H(M) : M >= 0, M 1 = mu1, M' 1 = mu2 }
//! ```
//!
//! with `H(M) = -sum M log M`. The minimizer is found by alternating matrix
//! scaling against the kernel `K = exp(-theta / tau)`; the scaling vectors
//! yield dual potentials `nu_k = tau * log(v_k)`, and the gradient of the
//! distance with respect to either marginal is the tangent-space projection
//! of the corresponding dual. These projections are the *messages* an edge
//! sends to its endpoints inside the flow.
//!
//! Duals are defined only up to the gauge `(nu1 + c, nu2 - c)`; all returned
//! duals are normalized so the first one has zero mean, which leaves the
//! coupling, the messages, and the distance unchanged.

use crate::error::{Error, Result};
use crate::simplex::{check_distribution, entropy, project_tangent_in_place};

/// Knobs of the scaling loop.
#[derive(Debug, Clone)]
pub struct SinkhornParams {
    /// Convergence test: total L1 violation of both marginal constraints.
    pub tolerance: f64,
    /// Iteration budget before a convergence error is reported.
    pub max_iters: usize,
    /// Iterate dual potentials with log-sum-exp updates instead of scaling
    /// vectors. Slower per iteration but immune to kernel under/overflow;
    /// intended for smoothing parameters below roughly `0.02 * max|theta|`.
    pub log_domain: bool,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            tolerance: 1e-8,
            max_iters: 10_000,
            log_domain: false,
        }
    }
}

/// Converged solution of one entropy-smoothed transport problem.
#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    /// Optimal coupling, `n1 x n2` row-major.
    pub coupling: Vec<f64>,
    /// Dual potential of the first marginal (zero mean).
    pub dual1: Vec<f64>,
    /// Dual potential of the second marginal.
    pub dual2: Vec<f64>,
    /// Solver steps used: scaling iterations plus any second-order finishing
    /// steps; a direct two-label solve counts as one.
    pub iterations: usize,
    /// Final L1 marginal violation.
    pub residual: f64,
}

/// The pair of tangent vectors an edge contributes to its endpoints'
/// energy gradients: projections of the optimal dual potentials.
#[derive(Debug, Clone)]
pub struct EdgeMessage {
    /// Gradient of the edge distance in its first argument.
    pub to_first: Vec<f64>,
    /// Gradient of the edge distance in its second argument.
    pub to_second: Vec<f64>,
}

/// Precomputed per-edge solver state: the cost matrix and (in scaling mode)
/// its kernel. Building this once per edge and reusing it across flow
/// iterations avoids re-exponentiating the cost matrix.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    n1: usize,
    n2: usize,
    theta: Vec<f64>,
    /// `exp(-theta / tau)`; absent in log-domain mode.
    k: Option<Vec<f64>>,
    /// Cost matrix equals its transpose bit for bit (square only). Lets the
    /// transposed matvec reuse the row-major code path.
    symmetric: bool,
}

/// Result of one edge solve, before any coupling is materialized.
#[derive(Debug, Clone)]
pub(crate) struct EdgeSolve {
    pub dual1: Vec<f64>,
    pub dual2: Vec<f64>,
    /// Scaling iterations plus any second-order finishing steps; a direct
    /// two-label solve counts as one.
    pub iterations: usize,
    pub residual: f64,
}

/// What the second-order finisher produced: either a solve below tolerance,
/// or an improved second potential for the scaling loop to resume from. The
/// finisher's achievable residual is limited by the conditioning of its
/// Hessian solves, while patient scaling is not, so bottoming out above the
/// tolerance is progress to build on rather than a failure.
enum NewtonOutcome {
    Done(EdgeSolve),
    Resume { nu2: Vec<f64>, steps: usize },
}

/// Scaling iterations between successive crawl-detection checks.
const STALL_CHECK_PERIOD: usize = 16;
/// Projected scaling iterations beyond which the loop hands off to the
/// second-order finisher even though the budget could absorb the crawl: a
/// tail this long costs more than the finisher's worst case.
const CRAWL_PATIENCE: usize = 256;
/// Cap on second-order finishing steps once a crawl is detected.
const NEWTON_STEP_LIMIT: usize = 64;
/// Step halvings before a finishing step is abandoned.
const LINE_SEARCH_LIMIT: usize = 48;

/// Everything the finisher needs at one value of the second potential: the
/// first potential is eliminated by balancing every row exactly, leaving a
/// smooth convex function of the second potential whose gradient is the
/// column-marginal violation.
struct SemiDualState {
    /// Objective value (up to an additive constant independent of `nu2`).
    value: f64,
    /// Row-balanced coupling; rows sum to the first marginal by construction.
    coupling: Vec<f64>,
    col_sums: Vec<f64>,
    /// Total L1 violation of both marginal constraints, matching the scaling
    /// loop's convergence measure.
    residual: f64,
    nu1: Vec<f64>,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!(
            "smoothing parameter tau must be positive and finite, got {tau}"
        )));
    }
    Ok(())
}

fn stability_advice(tau: f64, theta_max: f64) -> String {
    format!(
        "tau = {tau:.3e} is small against the cost magnitude {theta_max:.3e}; \
         increase tau or enable log-domain mode \
         (recommended below tau = 0.02 * max|theta|)"
    )
}

impl Kernel {
    /// Validates the cost matrix and, in scaling mode, builds and checks the
    /// kernel `exp(-theta / tau)`.
    pub(crate) fn new(
        theta: &[f64],
        n1: usize,
        n2: usize,
        tau: f64,
        log_domain: bool,
    ) -> Result<Kernel> {
        check_tau(tau)?;
        if theta.len() != n1 * n2 {
            return Err(Error::invalid(format!(
                "cost matrix has {} entries, expected {n1} x {n2}",
                theta.len()
            )));
        }
        if n1 < 2 || n2 < 2 {
            return Err(Error::invalid("marginals need at least two entries"));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("cost matrix contains a non-finite entry"));
        }
        let symmetric = n1 == n2 && crate::model::is_symmetric(theta, n1);
        let theta_max = theta.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let k = if log_domain {
            None
        } else {
            let k: Vec<f64> = theta.iter().map(|&t| (-t / tau).exp()).collect();
            if k.iter().any(|v| !v.is_finite()) {
                return Err(Error::stability(format!(
                    "kernel overflow: {}",
                    stability_advice(tau, theta_max)
                )));
            }
            // Underflow guard: a numerically all-zero row or column makes the
            // scaling problem infeasible.
            for r in 0..n1 {
                if k[r * n2..(r + 1) * n2].iter().all(|&v| v == 0.0) {
                    return Err(Error::stability(format!(
                        "kernel row {r} underflowed to zero: {}",
                        stability_advice(tau, theta_max)
                    )));
                }
            }
            for c in 0..n2 {
                if (0..n1).all(|r| k[r * n2 + c] == 0.0) {
                    return Err(Error::stability(format!(
                        "kernel column {c} underflowed to zero: {}",
                        stability_advice(tau, theta_max)
                    )));
                }
            }
            Some(k)
        };
        Ok(Kernel {
            n1,
            n2,
            theta: theta.to_vec(),
            k,
            symmetric,
        })
    }

    fn theta_max(&self) -> f64 {
        self.theta.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// `out = K v` (row-major).
    fn matvec(&self, k: &[f64], v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &k[r * self.n2..(r + 1) * self.n2];
            let mut acc = 0.0;
            for (kv, vv) in row.iter().zip(v.iter()) {
                acc += kv * vv;
            }
            *o = acc;
        }
    }

    /// `out = K' v`; reuses the row-major path when the matrix is symmetric.
    fn matvec_t(&self, k: &[f64], v: &[f64], out: &mut [f64]) {
        if self.symmetric {
            self.matvec(k, v, out);
            return;
        }
        out.fill(0.0);
        for (r, &vr) in v.iter().enumerate() {
            let row = &k[r * self.n2..(r + 1) * self.n2];
            for (o, kv) in out.iter_mut().zip(row.iter()) {
                *o += kv * vr;
            }
        }
    }

    /// Solves one edge problem. Two-label problems take a closed form; all
    /// others run the scaling loop, handing a provably-too-slow tail to the
    /// second-order finisher. `warm_dual2` (from a previous solve of the
    /// same edge) seeds the second potential; convergence is tested every
    /// iteration, after the second-marginal update, on the total L1
    /// violation of both marginal constraints.
    pub(crate) fn solve(
        &self,
        mu1: &[f64],
        mu2: &[f64],
        tau: f64,
        params: &SinkhornParams,
        warm_dual2: Option<&[f64]>,
    ) -> Result<EdgeSolve> {
        debug_assert_eq!(mu1.len(), self.n1);
        debug_assert_eq!(mu2.len(), self.n2);
        if self.n1 == 2 && self.n2 == 2 {
            if let Some(direct) = self.solve_direct_2x2(mu1, mu2, tau, params) {
                return Ok(direct);
            }
        }
        if params.log_domain {
            self.solve_log_domain(mu1, mu2, tau, params, warm_dual2)
        } else {
            self.solve_scaling(mu1, mu2, tau, params, warm_dual2)
        }
    }

    /// Solves a two-label problem in closed form. With both marginals pinned,
    /// the coupling has a single free entry `a = M[0][0]`, and stationarity
    /// fixes the odds ratio `M00 M11 / (M01 M10) = exp(-c / tau)` for the
    /// interaction difference `c = t00 + t11 - t01 - t10` — a quadratic in
    /// `a`. Near-balanced marginals freeze the scaling iteration's tail
    /// contraction at roughly `1 - 4 exp(-|c| / (2 tau))`, which can mean
    /// tens of millions of iterations; the algebraic route is exact and
    /// immune. Returns `None` when the optimum pushes `a` onto the interval
    /// boundary within float precision (a vanishing entry leaves no finite
    /// potential recovery; the iterative path converges quickly there) or
    /// when the reconstructed coupling misses the requested tolerance.
    fn solve_direct_2x2(
        &self,
        mu1: &[f64],
        mu2: &[f64],
        tau: f64,
        params: &SinkhornParams,
    ) -> Option<EdgeSolve> {
        // An attractive interaction (negative c) swaps into a repulsive one
        // under a column relabel; solving the repulsive frame means the
        // directly-computed root is always the low-mass corner, so no entry
        // is ever produced by subtractive cancellation of near-equal values.
        let c = (self.theta[0] + self.theta[3]) - (self.theta[1] + self.theta[2]);
        let swap = c < 0.0;
        let (t00, t01, t10, t11, q0) = if swap {
            (
                self.theta[1],
                self.theta[0],
                self.theta[3],
                self.theta[2],
                mu2[1],
            )
        } else {
            (
                self.theta[0],
                self.theta[1],
                self.theta[2],
                self.theta[3],
                mu2[0],
            )
        };
        let (p0, p1) = (mu1[0], mu1[1]);
        let s = p1 - q0; // equals 1 - p0 - q0 when the first marginal sums to one
        let lo = (-s).max(0.0);
        let hi = p0.min(q0);
        // Smallest-positive-root (no-cancellation) form of the stationarity
        // quadratic for a = M[0][0], scaled so coefficients stay bounded.
        let k = (-c.abs() / tau).exp(); // in (0, 1]
        let b = s + k * (p0 + q0);
        let disc = (b * b + 4.0 * (1.0 - k) * k * p0 * q0).sqrt();
        let a = if b >= 0.0 {
            2.0 * k * p0 * q0 / (b + disc)
        } else {
            (disc - b) / (2.0 * (1.0 - k))
        };
        if !(a > lo && a < hi) {
            return None;
        }
        // Entries (a, p0 - a, q0 - a, s + a) are all strictly positive, so
        // the potentials follow from entry ratios: fix the first row, then
        // read the second row's offset from its larger entry.
        let nu20 = t00 + tau * a.ln();
        let nu21 = t01 + tau * (p0 - a).ln();
        let nu11 = if q0 - a >= s + a {
            t10 + tau * (q0 - a).ln() - nu20
        } else {
            t11 + tau * (s + a).ln() - nu21
        };
        let mut dual1 = vec![0.0, nu11];
        let mut dual2 = if swap {
            vec![nu21, nu20]
        } else {
            vec![nu20, nu21]
        };
        if dual1.iter().chain(dual2.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        normalize_gauge(&mut dual1, &mut dual2);
        // Report the residual of the coupling the caller will reconstruct
        // from these potentials, not of the algebraic entries.
        let m = self.coupling_from_duals(&dual1, &dual2, tau);
        let residual = (m[0] + m[1] - mu1[0]).abs()
            + (m[2] + m[3] - mu1[1]).abs()
            + (m[0] + m[2] - mu2[0]).abs()
            + (m[1] + m[3] - mu2[1]).abs();
        if !(residual <= params.tolerance) {
            return None;
        }
        Some(EdgeSolve {
            dual1,
            dual2,
            iterations: 1,
            residual,
        })
    }

    fn solve_scaling(
        &self,
        mu1: &[f64],
        mu2: &[f64],
        tau: f64,
        params: &SinkhornParams,
        warm_dual2: Option<&[f64]>,
    ) -> Result<EdgeSolve> {
        let k = self.k.as_ref().expect("scaling mode has a kernel");
        let mut v2: Vec<f64> = match warm_dual2 {
            Some(nu2) => nu2.iter().map(|&n| (n / tau).exp()).collect(),
            None => vec![1.0; self.n2],
        };
        let mut v1 = vec![0.0; self.n1];
        let mut s = vec![0.0; self.n1]; // K v2
        let mut t = vec![0.0; self.n2]; // K' v1
        self.matvec(k, &v2, &mut s);

        let mut residual = f64::INFINITY;
        let mut window_residual = f64::INFINITY;
        let mut finisher_steps = 0;
        let mut finisher_attempts = 0;
        if let Some(w) = warm_dual2 {
            // A warm second potential usually sits near the solution, where
            // the finisher closes the gap in a step or two; the scaling loop
            // would spend a full detection window discovering its own
            // slowness first.
            match self.newton_polish(mu1, mu2, tau, params, w.to_vec(), 0) {
                NewtonOutcome::Done(solve) => return Ok(solve),
                NewtonOutcome::Resume { nu2, steps } => {
                    let improved: Vec<f64> = nu2.iter().map(|&n| (n / tau).exp()).collect();
                    if improved.iter().all(|v| v.is_finite() && *v > 0.0) {
                        v2 = improved;
                        self.matvec(k, &v2, &mut s);
                    }
                    finisher_steps = steps;
                    finisher_attempts = 1;
                }
            }
        }
        for it in 1..=params.max_iters {
            for ((a, &m), &d) in v1.iter_mut().zip(mu1.iter()).zip(s.iter()) {
                *a = m / d;
            }
            if v1.iter().any(|v| !v.is_finite()) {
                return Err(Error::stability(format!(
                    "scaling vector overflowed or hit a zero denominator: {}",
                    stability_advice(tau, self.theta_max())
                )));
            }
            self.matvec_t(k, &v1, &mut t);
            for ((b, &m), &d) in v2.iter_mut().zip(mu2.iter()).zip(t.iter()) {
                *b = m / d;
            }
            if v2.iter().any(|v| !v.is_finite()) {
                return Err(Error::stability(format!(
                    "scaling vector overflowed or hit a zero denominator: {}",
                    stability_advice(tau, self.theta_max())
                )));
            }
            self.matvec(k, &v2, &mut s);
            residual = v1
                .iter()
                .zip(s.iter())
                .zip(mu1.iter())
                .map(|((&a, &sv), &m)| (a * sv - m).abs())
                .sum::<f64>()
                + v2.iter()
                    .zip(t.iter())
                    .zip(mu2.iter())
                    .map(|((&b, &tv), &m)| (b * tv - m).abs())
                    .sum::<f64>();
            if residual <= params.tolerance {
                let mut dual1: Vec<f64> = v1.iter().map(|&v| tau * v.ln()).collect();
                let mut dual2: Vec<f64> = v2.iter().map(|&v| tau * v.ln()).collect();
                normalize_gauge(&mut dual1, &mut dual2);
                return Ok(EdgeSolve {
                    dual1,
                    dual2,
                    iterations: it + finisher_steps,
                    residual,
                });
            }
            if it % STALL_CHECK_PERIOD == 0 {
                if finisher_attempts < 2
                    && crawl_outlasts_budget(
                        residual / window_residual,
                        residual,
                        params.tolerance,
                        params.max_iters - it,
                    )
                {
                    let nu2: Vec<f64> = v2.iter().map(|&v| tau * v.ln()).collect();
                    if nu2.iter().all(|v| v.is_finite()) {
                        match self.newton_polish(mu1, mu2, tau, params, nu2, it) {
                            NewtonOutcome::Done(solve) => return Ok(solve),
                            NewtonOutcome::Resume { nu2, steps } => {
                                // Resume scaling from the improved potential
                                // if it survives the trip back to a vector.
                                let improved: Vec<f64> =
                                    nu2.iter().map(|&n| (n / tau).exp()).collect();
                                if improved.iter().all(|v| v.is_finite() && *v > 0.0) {
                                    v2 = improved;
                                    self.matvec(k, &v2, &mut s);
                                }
                                finisher_steps += steps.max(1);
                                finisher_attempts += 1;
                            }
                        }
                    }
                }
                window_residual = residual;
            }
        }
        Err(Error::Convergence {
            iterations: params.max_iters + finisher_steps,
            residual,
            tolerance: params.tolerance,
        })
    }

    fn solve_log_domain(
        &self,
        mu1: &[f64],
        mu2: &[f64],
        tau: f64,
        params: &SinkhornParams,
        warm_dual2: Option<&[f64]>,
    ) -> Result<EdgeSolve> {
        let (n1, n2) = (self.n1, self.n2);
        let ln_mu1: Vec<f64> = mu1.iter().map(|&m| m.ln()).collect();
        let ln_mu2: Vec<f64> = mu2.iter().map(|&m| m.ln()).collect();
        let mut nu1 = vec![0.0; n1];
        let mut nu2: Vec<f64> = match warm_dual2 {
            Some(w) => w.to_vec(),
            None => vec![0.0; n2],
        };
        let mut exponents = vec![0.0; n1 * n2];

        let mut residual = f64::INFINITY;
        let mut window_residual = f64::INFINITY;
        let mut finisher_steps = 0;
        let mut finisher_attempts = 0;
        if warm_dual2.is_some() {
            // Same warm-start shortcut as the scaling loop: finish from the
            // previous solve's potential instead of rediscovering a crawl.
            match self.newton_polish(mu1, mu2, tau, params, nu2.clone(), 0) {
                NewtonOutcome::Done(solve) => return Ok(solve),
                NewtonOutcome::Resume { nu2: improved, steps } => {
                    nu2 = improved;
                    finisher_steps = steps;
                    finisher_attempts = 1;
                }
            }
        }
        for it in 1..=params.max_iters {
            // nu1_r = tau ln mu1_r - tau LSE_c((nu2_c - theta_rc) / tau)
            for r in 0..n1 {
                let row = &self.theta[r * n2..(r + 1) * n2];
                let mut max = f64::NEG_INFINITY;
                for (c, &th) in row.iter().enumerate() {
                    max = max.max((nu2[c] - th) / tau);
                }
                let sum: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(c, &th)| ((nu2[c] - th) / tau - max).exp())
                    .sum();
                nu1[r] = tau * (ln_mu1[r] - max - sum.ln());
            }
            // nu2_c = tau ln mu2_c - tau LSE_r((nu1_r - theta_rc) / tau)
            for c in 0..n2 {
                let mut max = f64::NEG_INFINITY;
                for r in 0..n1 {
                    max = max.max((nu1[r] - self.theta[r * n2 + c]) / tau);
                }
                let sum: f64 = (0..n1)
                    .map(|r| ((nu1[r] - self.theta[r * n2 + c]) / tau - max).exp())
                    .sum();
                nu2[c] = tau * (ln_mu2[c] - max - sum.ln());
            }
            // Residual via the implied coupling (entries bounded by mu2).
            for r in 0..n1 {
                for c in 0..n2 {
                    exponents[r * n2 + c] =
                        ((nu1[r] + nu2[c] - self.theta[r * n2 + c]) / tau).exp();
                }
            }
            residual = 0.0;
            for r in 0..n1 {
                let row_sum: f64 = exponents[r * n2..(r + 1) * n2].iter().sum();
                residual += (row_sum - mu1[r]).abs();
            }
            for c in 0..n2 {
                let col_sum: f64 = (0..n1).map(|r| exponents[r * n2 + c]).sum();
                residual += (col_sum - mu2[c]).abs();
            }
            if residual <= params.tolerance {
                let mut dual1 = nu1;
                let mut dual2 = nu2;
                normalize_gauge(&mut dual1, &mut dual2);
                return Ok(EdgeSolve {
                    dual1,
                    dual2,
                    iterations: it + finisher_steps,
                    residual,
                });
            }
            if it % STALL_CHECK_PERIOD == 0 {
                if finisher_attempts < 2
                    && crawl_outlasts_budget(
                        residual / window_residual,
                        residual,
                        params.tolerance,
                        params.max_iters - it,
                    )
                {
                    match self.newton_polish(mu1, mu2, tau, params, nu2.clone(), it) {
                        NewtonOutcome::Done(solve) => return Ok(solve),
                        NewtonOutcome::Resume { nu2: improved, steps } => {
                            nu2 = improved;
                            finisher_steps += steps.max(1);
                            finisher_attempts += 1;
                        }
                    }
                }
                window_residual = residual;
            }
        }
        Err(Error::Convergence {
            iterations: params.max_iters + finisher_steps,
            residual,
            tolerance: params.tolerance,
        })
    }

    /// Evaluates the row-balanced problem at one value of the second
    /// potential. Exponents are max-subtracted per row, so any finite
    /// potentials are safe.
    fn semi_dual_state(&self, mu1: &[f64], mu2: &[f64], tau: f64, nu2: &[f64]) -> SemiDualState {
        let (n1, n2) = (self.n1, self.n2);
        let mut coupling = vec![0.0; n1 * n2];
        let mut nu1 = vec![0.0; n1];
        let mut value = 0.0;
        let mut residual = 0.0;
        for r in 0..n1 {
            let row = &self.theta[r * n2..(r + 1) * n2];
            let out = &mut coupling[r * n2..(r + 1) * n2];
            let mut max = f64::NEG_INFINITY;
            for (c, &th) in row.iter().enumerate() {
                max = max.max((nu2[c] - th) / tau);
            }
            let mut sum = 0.0;
            for (c, &th) in row.iter().enumerate() {
                let w = ((nu2[c] - th) / tau - max).exp();
                out[c] = w;
                sum += w;
            }
            let lse = max + sum.ln();
            value += mu1[r] * tau * lse;
            nu1[r] = tau * (mu1[r].ln() - lse);
            let scale = mu1[r] / sum;
            let mut row_sum = 0.0;
            for w in out.iter_mut() {
                *w *= scale;
                row_sum += *w;
            }
            residual += (row_sum - mu1[r]).abs();
        }
        let mut col_sums = vec![0.0; n2];
        for r in 0..n1 {
            for (cs, &m) in col_sums.iter_mut().zip(&coupling[r * n2..(r + 1) * n2]) {
                *cs += m;
            }
        }
        for (c, (&cs, &m)) in col_sums.iter().zip(mu2.iter()).enumerate() {
            value -= m * nu2[c];
            residual += (cs - m).abs();
        }
        SemiDualState {
            value,
            coupling,
            col_sums,
            residual,
            nu1,
        }
    }

    /// Damped Newton finisher on the second potential. When ratios of cost
    /// differences to `tau` are large and the marginals sit near a balance
    /// point, the scaling iteration's asymptotic contraction degenerates
    /// toward one and the tail can outlast any reasonable budget; a few
    /// curvature-aware steps on the row-balanced problem close the same gap
    /// directly. `spent` scaling iterations are charged against the budget
    /// and included in the reported count. Running out of usable steps hands
    /// the improved potential back for the scaling loop to resume from.
    fn newton_polish(
        &self,
        mu1: &[f64],
        mu2: &[f64],
        tau: f64,
        params: &SinkhornParams,
        mut nu2: Vec<f64>,
        spent: usize,
    ) -> NewtonOutcome {
        let n2 = self.n2;
        let budget = params
            .max_iters
            .saturating_sub(spent)
            .min(NEWTON_STEP_LIMIT);
        let mut state = self.semi_dual_state(mu1, mu2, tau, &nu2);
        let mut steps = 0;
        loop {
            if state.residual <= params.tolerance {
                let mut dual1 = state.nu1;
                let mut dual2 = nu2;
                normalize_gauge(&mut dual1, &mut dual2);
                return NewtonOutcome::Done(EdgeSolve {
                    dual1,
                    dual2,
                    // A warm start that is already below tolerance still
                    // counts its verification as one unit of work.
                    iterations: (spent + steps).max(1),
                    residual: state.residual,
                });
            }
            if steps == budget {
                break;
            }
            // Hessian of the row-balanced objective, scaled by tau so its
            // entries stay near the coupling's: diag(col sums) minus the
            // couplings' row-wise outer products.
            let mut h = vec![0.0; n2 * n2];
            for (c, &cs) in state.col_sums.iter().enumerate() {
                h[c * n2 + c] = cs;
            }
            for (r, &m1) in mu1.iter().enumerate() {
                let row = &state.coupling[r * n2..(r + 1) * n2];
                for (c1, &m_1) in row.iter().enumerate() {
                    let f = m_1 / m1;
                    for (c2, &m_2) in row.iter().enumerate() {
                        h[c1 * n2 + c2] -= f * m_2;
                    }
                }
            }
            // The all-ones direction is the dual gauge; a rank-one shift pins
            // it, and a relative ridge guards nearly-dead mass channels.
            let trace: f64 = (0..n2).map(|c| h[c * n2 + c]).sum();
            let gauge = trace / (n2 * n2) as f64;
            let ridge = 1e-12 * trace / n2 as f64;
            for c1 in 0..n2 {
                for c2 in 0..n2 {
                    h[c1 * n2 + c2] += gauge;
                }
                h[c1 * n2 + c1] += ridge;
            }
            let grad: Vec<f64> = state
                .col_sums
                .iter()
                .zip(mu2.iter())
                .map(|(&cs, &m)| cs - m)
                .collect();
            let mut direction: Vec<f64> = grad.iter().map(|&g| -tau * g).collect();
            if !solve_dense(&mut h, &mut direction, n2) {
                break;
            }
            let slope: f64 = grad
                .iter()
                .zip(direction.iter())
                .map(|(&g, &d)| g * d)
                .sum();
            if !slope.is_finite() || slope >= 0.0 {
                break;
            }
            // Backtrack until the objective actually decreases.
            let mut accepted = None;
            let mut t = 1.0;
            for _ in 0..LINE_SEARCH_LIMIT {
                let candidate: Vec<f64> = nu2
                    .iter()
                    .zip(direction.iter())
                    .map(|(&v, &d)| v + t * d)
                    .collect();
                let cand_state = self.semi_dual_state(mu1, mu2, tau, &candidate);
                if cand_state.value.is_finite()
                    && cand_state.value <= state.value + 1e-4 * t * slope
                {
                    accepted = Some((candidate, cand_state));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((candidate, cand_state)) => {
                    nu2 = candidate;
                    state = cand_state;
                    steps += 1;
                }
                None => break,
            }
        }
        NewtonOutcome::Resume { nu2, steps }
    }

    /// Materializes the coupling implied by a pair of dual potentials.
    pub(crate) fn coupling_from_duals(&self, dual1: &[f64], dual2: &[f64], tau: f64) -> Vec<f64> {
        let (n1, n2) = (self.n1, self.n2);
        match &self.k {
            Some(k) => {
                let a: Vec<f64> = dual1.iter().map(|&n| (n / tau).exp()).collect();
                let b: Vec<f64> = dual2.iter().map(|&n| (n / tau).exp()).collect();
                let mut m = vec![0.0; n1 * n2];
                for r in 0..n1 {
                    for c in 0..n2 {
                        m[r * n2 + c] = a[r] * k[r * n2 + c] * b[c];
                    }
                }
                m
            }
            None => {
                let mut m = vec![0.0; n1 * n2];
                for r in 0..n1 {
                    for c in 0..n2 {
                        m[r * n2 + c] =
                            ((dual1[r] + dual2[c] - self.theta[r * n2 + c]) / tau).exp();
                    }
                }
                m
            }
        }
    }

    /// Smoothed transport cost `<theta, M> - tau * H(M)` of a coupling.
    pub(crate) fn primal_value(&self, coupling: &[f64], tau: f64) -> f64 {
        let linear: f64 = self
            .theta
            .iter()
            .zip(coupling.iter())
            .map(|(&t, &m)| t * m)
            .sum();
        linear - tau * entropy(coupling)
    }
}

/// Decides whether the scaling loop should hand off to the second-order
/// finisher: when the contraction measured over one detection window either
/// cannot reach the tolerance inside the remaining iteration budget, or
/// projects to a tail long enough that finishing directly is cheaper.
fn crawl_outlasts_budget(
    window_ratio: f64,
    residual: f64,
    tolerance: f64,
    remaining: usize,
) -> bool {
    if !(window_ratio > 0.0) {
        // First window, a residual that collapsed to zero, or a non-finite
        // reading: let the loop keep running.
        return false;
    }
    if window_ratio >= 1.0 {
        return true; // tail is frozen or growing
    }
    let windows_needed = (tolerance / residual).ln() / window_ratio.ln();
    let projected = windows_needed * STALL_CHECK_PERIOD as f64;
    projected > remaining.min(CRAWL_PATIENCE) as f64
}

/// Solves a dense square system in place by partial-pivot elimination.
/// Returns `false` when a pivot vanishes.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return false;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for c in (col + 1)..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in (col + 1)..n {
            acc -= a[col * n + c] * b[c];
        }
        b[col] = acc / a[col * n + col];
    }
    true
}

/// Fixes the dual gauge so the first potential has zero mean. The shift
/// `(nu1 - c, nu2 + c)` stays inside the solution set of the dual problem.
fn normalize_gauge(dual1: &mut [f64], dual2: &mut [f64]) {
    let c = dual1.iter().sum::<f64>() / dual1.len() as f64;
    for v in dual1.iter_mut() {
        *v -= c;
    }
    for v in dual2.iter_mut() {
        *v += c;
    }
}

fn check_problem(theta: &[f64], mu1: &[f64], mu2: &[f64]) -> Result<()> {
    check_distribution(mu1)?;
    check_distribution(mu2)?;
    if theta.len() != mu1.len() * mu2.len() {
        return Err(Error::invalid(format!(
            "cost matrix has {} entries, expected {} x {}",
            theta.len(),
            mu1.len(),
            mu2.len()
        )));
    }
    Ok(())
}

/// Solves one smoothed transport problem from a cold start and returns the
/// coupling together with gauge-normalized duals.
///
/// Two-label problems are solved in closed form (one quadratic). Larger
/// problems run the alternating scaling iteration; if its measured
/// contraction cannot reach the tolerance within the remaining budget, a
/// damped Newton finisher on the second potential closes the gap instead of
/// burning out the budget on a frozen tail.
pub fn sinkhorn(
    theta: &[f64],
    mu1: &[f64],
    mu2: &[f64],
    tau: f64,
    params: &SinkhornParams,
) -> Result<SinkhornSolution> {
    check_problem(theta, mu1, mu2)?;
    let kernel = Kernel::new(theta, mu1.len(), mu2.len(), tau, params.log_domain)?;
    let solve = kernel.solve(mu1, mu2, tau, params, None)?;
    let coupling = kernel.coupling_from_duals(&solve.dual1, &solve.dual2, tau);
    Ok(SinkhornSolution {
        coupling,
        dual1: solve.dual1,
        dual2: solve.dual2,
        iterations: solve.iterations,
        residual: solve.residual,
    })
}

/// The smoothed edge distance `min <theta, M> - tau H(M)` over couplings of
/// `(mu1, mu2)`, evaluated at the converged coupling.
pub fn smoothed_edge_distance(
    theta: &[f64],
    mu1: &[f64],
    mu2: &[f64],
    tau: f64,
    params: &SinkhornParams,
) -> Result<f64> {
    check_problem(theta, mu1, mu2)?;
    let kernel = Kernel::new(theta, mu1.len(), mu2.len(), tau, params.log_domain)?;
    let solve = kernel.solve(mu1, mu2, tau, params, None)?;
    let coupling = kernel.coupling_from_duals(&solve.dual1, &solve.dual2, tau);
    Ok(kernel.primal_value(&coupling, tau))
}

/// Both gradients of the smoothed edge distance: tangent projections of the
/// optimal dual potentials. One solve supplies the message to each endpoint.
pub fn wasserstein_message(
    theta: &[f64],
    mu1: &[f64],
    mu2: &[f64],
    tau: f64,
    params: &SinkhornParams,
) -> Result<EdgeMessage> {
    check_problem(theta, mu1, mu2)?;
    let kernel = Kernel::new(theta, mu1.len(), mu2.len(), tau, params.log_domain)?;
    let solve = kernel.solve(mu1, mu2, tau, params, None)?;
    Ok(message_from_solve(&solve))
}

pub(crate) fn message_from_solve(solve: &EdgeSolve) -> EdgeMessage {
    let mut to_first = solve.dual1.clone();
    let mut to_second = solve.dual2.clone();
    project_tangent_in_place(&mut to_first);
    project_tangent_in_place(&mut to_second);
    EdgeMessage {
        to_first,
        to_second,
    }
}

/// Value of the dual objective at the given potentials, with the free gauge
/// direction optimized out:
///
/// ```text
/// <mu1, nu1> + <mu2, nu2> - tau * log( sum exp((nu1 (+) nu2 - theta) / tau) )
/// ```
///
/// This is a lower bound on the smoothed edge distance for any potentials
/// and matches it at the optimum, making the primal-dual gap a meaningful
/// two-route correctness check.
pub fn dual_objective(
    theta: &[f64],
    mu1: &[f64],
    mu2: &[f64],
    dual1: &[f64],
    dual2: &[f64],
    tau: f64,
) -> f64 {
    let (n1, n2) = (mu1.len(), mu2.len());
    let linear: f64 = mu1.iter().zip(dual1.iter()).map(|(&m, &n)| m * n).sum::<f64>()
        + mu2.iter().zip(dual2.iter()).map(|(&m, &n)| m * n).sum::<f64>();
    let mut max = f64::NEG_INFINITY;
    for r in 0..n1 {
        for c in 0..n2 {
            max = max.max((dual1[r] + dual2[c] - theta[r * n2 + c]) / tau);
        }
    }
    let mut sum = 0.0;
    for r in 0..n1 {
        for c in 0..n2 {
            sum += ((dual1[r] + dual2[c] - theta[r * n2 + c]) / tau - max).exp();
        }
    }
    linear - tau * (max + sum.ln())
}
