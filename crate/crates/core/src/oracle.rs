//! Independent reference solvers used to certify the flow.
//!
//! Two families live here: exhaustive minimization of the discrete energy
//! over all labelings, and — for binary triangle models — exact linear
//! programs over two relaxations of the labeling set, solved by scanning the
//! complete vertex list of the feasible polytope.
//!
//! A binary triangle model is embedded into six moment coordinates
//! `p = (p1, p2, p3, p12, p13, p23)`, where `pi` is the probability of node
//! `i` taking label 1 and `pij` the probability of nodes `i` and `j` both
//! taking label 1. The discrete energy becomes an affine function `<c, p> +
//! offset`. Two feasible sets matter:
//!
//! * the *marginal* polytope — the convex hull of the eight labeling
//!   embeddings; minimizing over it is exactly the discrete problem;
//! * the *local* polytope — the relaxation enforcing only edgewise
//!   consistency (`0 <= pij`, `pij <= pi`, `pij <= pj`,
//!   `pi + pj - pij <= 1`); it has the same eight integral vertices plus
//!   four fractional ones, so its minimum can drop below the discrete one.
//!
//! On integral vertices both LPs evaluate the objective through
//! [`GraphicalModel::discrete_energy`] in the same scan order as
//! [`brute_force_min`], which makes `lp_marginal` agree with brute force bit
//! for bit and guarantees `lp_local <= lp_marginal` exactly.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::GraphicalModel;

/// Largest number of labelings the exhaustive scan will enumerate.
const BRUTE_FORCE_LIMIT: usize = 1 << 24;

/// Tolerance for feasibility, pivoting, and vertex deduplication in the
/// polytope enumeration. The polytope data is tiny integers, so this is
/// far beyond any rounding the elimination can introduce.
const GEOMETRY_EPS: f64 = 1e-9;

/// Advances a labeling lexicographically (last node fastest); returns
/// `false` after the all-max labeling wraps back to all zeros.
fn next_labeling(labeling: &mut [usize], num_labels: usize) -> bool {
    for slot in labeling.iter_mut().rev() {
        *slot += 1;
        if *slot < num_labels {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Minimizes the discrete energy by enumerating every labeling in
/// lexicographic order; ties keep the first minimizer. Refuses instances
/// with more than 2^24 labelings.
pub fn brute_force_min(model: &GraphicalModel) -> Result<(Vec<usize>, f64)> {
    let m = model.graph().num_nodes();
    let n = model.num_labels();
    let mut count: usize = 1;
    for _ in 0..m {
        count = count
            .checked_mul(n)
            .filter(|&c| c <= BRUTE_FORCE_LIMIT)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "exhaustive search over {n}^{m} labelings exceeds the limit of 2^24"
                ))
            })?;
    }
    let mut labeling = vec![0usize; m];
    let mut best_labeling = labeling.clone();
    let mut best_energy = model.discrete_energy(&labeling);
    while next_labeling(&mut labeling, n) {
        let energy = model.discrete_energy(&labeling);
        if energy < best_energy {
            best_energy = energy;
            best_labeling.copy_from_slice(&labeling);
        }
    }
    Ok((best_labeling, best_energy))
}

/// Moment embedding of a binary triangle labeling.
pub fn k3_embed(labeling: &[usize; 3]) -> [f64; 6] {
    let x: Vec<f64> = labeling.iter().map(|&l| l as f64).collect();
    [
        x[0],
        x[1],
        x[2],
        x[0] * x[1],
        x[0] * x[2],
        x[1] * x[2],
    ]
}

/// A vertex of the local polytope of the binary triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct K3Vertex {
    /// Moment coordinates; every entry is exactly 0, 1/2, or 1.
    pub coords: [f64; 6],
    /// The labeling this vertex embeds, when integral.
    pub labeling: Option<[usize; 3]>,
}

/// The affine objective `<linear, p> + offset` equal to the discrete energy
/// on embedded labelings.
#[derive(Debug, Clone, PartialEq)]
pub struct K3Objective {
    pub linear: [f64; 6],
    pub offset: f64,
}

impl K3Objective {
    pub fn value(&self, p: &[f64; 6]) -> f64 {
        self.linear
            .iter()
            .zip(p.iter())
            .map(|(&c, &v)| c * v)
            .sum::<f64>()
            + self.offset
    }
}

fn require_binary_triangle(model: &GraphicalModel) -> Result<()> {
    let graph = model.graph();
    if graph.num_nodes() != 3 || graph.num_edges() != 3 || model.num_labels() != 2 {
        return Err(Error::invalid(format!(
            "polytope oracles need a binary triangle model, got {} nodes, {} edges, {} labels",
            graph.num_nodes(),
            graph.num_edges(),
            model.num_labels()
        )));
    }
    Ok(())
}

/// Moment-space objective of a binary triangle model. Substituting the
/// four pairwise entries `t_ab` of each edge by the moment coordinates
/// collapses the energy to an affine function.
pub fn k3_objective(model: &GraphicalModel) -> Result<K3Objective> {
    require_binary_triangle(model)?;
    let mut linear = [0.0; 6];
    let mut offset = 0.0;
    for i in 0..3 {
        let u = model.unary(i);
        linear[i] = u[1] - u[0];
        offset += u[0];
    }
    for e in 0..3 {
        let (i, j) = model.graph().edge(e);
        let pair_coord = match (i, j) {
            (0, 1) => 3,
            (0, 2) => 4,
            (1, 2) => 5,
            other => {
                return Err(Error::invalid(format!(
                    "triangle edge {other:?} is not one of (0,1), (0,2), (1,2)"
                )))
            }
        };
        let t = model.pairwise(e); // [t00, t01, t10, t11]
        linear[i] += t[2] - t[0];
        linear[j] += t[1] - t[0];
        linear[pair_coord] = t[0] - t[1] - t[2] + t[3];
        offset += t[0];
    }
    Ok(K3Objective { linear, offset })
}

/// The 12 facet inequalities `A p <= b` of the local polytope: for each edge
/// (vars `a`, `b`, pair var `ab`): `-p_ab <= 0`, `p_ab - p_a <= 0`,
/// `p_ab - p_b <= 0`, `p_a + p_b - p_ab <= 1`.
fn facet_system() -> ([[f64; 6]; 12], [f64; 12]) {
    let mut a = [[0.0; 6]; 12];
    let mut b = [0.0; 12];
    for (e, &(va, vb, vab)) in [(0, 1, 3), (0, 2, 4), (1, 2, 5)].iter().enumerate() {
        let base = 4 * e;
        a[base][vab] = -1.0;
        a[base + 1][vab] = 1.0;
        a[base + 1][va] = -1.0;
        a[base + 2][vab] = 1.0;
        a[base + 2][vb] = -1.0;
        a[base + 3][va] = 1.0;
        a[base + 3][vb] = 1.0;
        a[base + 3][vab] = -1.0;
        b[base + 3] = 1.0;
    }
    (a, b)
}

/// Solves a 6x6 linear system by Gaussian elimination with partial
/// pivoting; `None` when numerically singular.
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < GEOMETRY_EPS {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..6 {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..6 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for row in (0..6).rev() {
        let mut acc = b[row];
        for k in row + 1..6 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Rank of the tight facet rows at a point; a vertex needs rank 6.
#[cfg(test)]
fn tight_rank(point: &[f64; 6]) -> usize {
    let (a, b) = facet_system();
    let mut rows: Vec<[f64; 6]> = (0..12)
        .filter(|&r| {
            let lhs: f64 = a[r].iter().zip(point.iter()).map(|(&c, &p)| c * p).sum();
            (lhs - b[r]).abs() <= GEOMETRY_EPS
        })
        .map(|r| a[r])
        .collect();
    let mut rank = 0;
    for col in 0..6 {
        let Some(pivot) = (rank..rows.len()).max_by(|&r, &s| {
            rows[r][col].abs().total_cmp(&rows[s][col].abs())
        }) else {
            break;
        };
        if rows[pivot][col].abs() < GEOMETRY_EPS {
            continue;
        }
        rows.swap(rank, pivot);
        for r in rank + 1..rows.len() {
            let f = rows[r][col] / rows[rank][col];
            for k in col..6 {
                rows[r][k] -= f * rows[rank][k];
            }
        }
        rank += 1;
    }
    rank
}

fn snap(v: f64) -> f64 {
    for target in [0.0, 0.5, 1.0] {
        if (v - target).abs() <= GEOMETRY_EPS {
            return target;
        }
    }
    v
}

fn classify(coords: &[f64; 6]) -> Option<[usize; 3]> {
    let integral = coords.iter().all(|&v| v == 0.0 || v == 1.0);
    if !integral {
        return None;
    }
    let labeling = [coords[0] as usize, coords[1] as usize, coords[2] as usize];
    let consistent = coords[3] == coords[0] * coords[1]
        && coords[4] == coords[0] * coords[2]
        && coords[5] == coords[1] * coords[2];
    consistent.then_some(labeling)
}

/// Enumerates every vertex of the local polytope: all feasible solutions of
/// six-row square subsystems of the facet system. Sorted with the eight
/// integral vertices first (by labeling, node 0 most significant), then the
/// fractional vertices in lexicographic coordinate order.
fn enumerate_vertices() -> Vec<K3Vertex> {
    let (a, b) = facet_system();
    let mut vertices: Vec<[f64; 6]> = Vec::new();
    // All 6-element subsets of the 12 rows.
    let mut subset = [0usize, 1, 2, 3, 4, 5];
    loop {
        let sys_a = std::array::from_fn(|k| a[subset[k]]);
        let sys_b = std::array::from_fn(|k| b[subset[k]]);
        if let Some(p) = solve6(sys_a, sys_b) {
            let feasible = (0..12).all(|r| {
                let lhs: f64 = a[r].iter().zip(p.iter()).map(|(&c, &v)| c * v).sum();
                lhs <= b[r] + GEOMETRY_EPS
            });
            if feasible
                && !vertices.iter().any(|q| {
                    q.iter().zip(p.iter()).all(|(&x, &y)| (x - y).abs() <= GEOMETRY_EPS)
                })
            {
                vertices.push(p);
            }
        }
        // Advance the subset odometer.
        let mut k = 5usize;
        loop {
            subset[k] += 1;
            if subset[k] <= 6 + k {
                for j in k + 1..6 {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
            if k == 0 {
                break;
            }
            k -= 1;
        }
        if subset[0] > 6 {
            break;
        }
    }

    let mut out: Vec<K3Vertex> = vertices
        .into_iter()
        .map(|p| {
            let coords = std::array::from_fn(|k| snap(p[k]));
            let labeling = classify(&coords);
            K3Vertex { coords, labeling }
        })
        .collect();
    out.sort_by(|x, y| {
        let key = |v: &K3Vertex| match v.labeling {
            Some(l) => (0usize, [l[0] as u8, l[1] as u8, l[2] as u8], [0u64; 6]),
            None => (
                1usize,
                [0, 0, 0],
                std::array::from_fn(|k| v.coords[k].to_bits()),
            ),
        };
        key(x).cmp(&key(y))
    });
    out
}

/// The complete vertex list of the local polytope, computed once.
pub fn k3_local_vertices() -> &'static [K3Vertex] {
    static VERTICES: OnceLock<Vec<K3Vertex>> = OnceLock::new();
    VERTICES.get_or_init(enumerate_vertices)
}

/// Exact optimum of an LP over a relaxation of the binary triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeSolution {
    /// Optimal vertex in moment coordinates.
    pub point: [f64; 6],
    /// Objective value there.
    pub value: f64,
    /// Position of the vertex in [`k3_local_vertices`] order.
    pub vertex_index: usize,
    /// The labeling, when the optimal vertex is integral.
    pub labeling: Option<[usize; 3]>,
}

/// Scans the eight integral vertices through the discrete energy; ties keep
/// the first in lexicographic labeling order. This is the marginal-polytope
/// LP and agrees with [`brute_force_min`] exactly.
fn best_integral(model: &GraphicalModel) -> PolytopeSolution {
    let mut best: Option<PolytopeSolution> = None;
    for x0 in 0..2usize {
        for x1 in 0..2usize {
            for x2 in 0..2usize {
                let energy = model.discrete_energy(&[x0, x1, x2]);
                if best.as_ref().is_none_or(|b| energy < b.value) {
                    let labeling = [x0, x1, x2];
                    best = Some(PolytopeSolution {
                        point: k3_embed(&labeling),
                        value: energy,
                        vertex_index: 4 * x0 + 2 * x1 + x2,
                        labeling: Some(labeling),
                    });
                }
            }
        }
    }
    best.expect("eight candidates were scanned")
}

/// Minimizes the moment objective over the marginal polytope (the convex
/// hull of labelings) — the exact discrete optimum.
pub fn lp_marginal(model: &GraphicalModel) -> Result<PolytopeSolution> {
    require_binary_triangle(model)?;
    Ok(best_integral(model))
}

/// Minimizes the moment objective over the local polytope. Integral
/// vertices are evaluated exactly as in [`lp_marginal`], so the local value
/// can only be lower.
pub fn lp_local(model: &GraphicalModel) -> Result<PolytopeSolution> {
    require_binary_triangle(model)?;
    let objective = k3_objective(model)?;
    let mut best = best_integral(model);
    for (index, vertex) in k3_local_vertices().iter().enumerate() {
        if vertex.labeling.is_some() {
            continue;
        }
        let value = objective.value(&vertex.coords);
        if value < best.value {
            best = PolytopeSolution {
                point: vertex.coords,
                value,
                vertex_index: index,
                labeling: None,
            };
        }
    }
    Ok(best)
}
