//! Pairwise discrete models: graphs, potentials, and the discrete objective.
//!
//! A model assigns every node a unary cost vector over `num_labels` labels
//! and every edge an `num_labels x num_labels` cost matrix. Edges are stored
//! in canonical orientation `i < j`; the matrix entry `(k, r)` is the cost of
//! node `i` taking label `k` while node `j` takes label `r`.

use rand::Rng;

use crate::error::{Error, Result};

/// Which pixels count as neighbors when building a grid model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    /// 4-connectivity: horizontal and vertical neighbors.
    Four,
    /// 8-connectivity: additionally both diagonals.
    Eight,
}

/// An incident edge as seen from one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncidentEdge {
    /// Index into the graph's edge list.
    pub edge: usize,
    /// The node on the other end.
    pub neighbor: usize,
    /// True when the owning node is the first (smaller) endpoint, i.e. the
    /// row index of the edge's cost matrix.
    pub is_first: bool,
}

/// Undirected simple graph with canonically oriented edges (`i < j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    incidence: Vec<Vec<IncidentEdge>>,
}

impl Graph {
    /// Builds a graph, validating that every edge satisfies `i < j < num_nodes`
    /// and appears at most once.
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::invalid("graph needs at least one node"));
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in &edges {
            if i >= j {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) is not in canonical orientation (need i < j)"
                )));
            }
            if j >= num_nodes {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) references node {j} but the graph has {num_nodes} nodes"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
        }
        let mut incidence = vec![Vec::new(); num_nodes];
        for (e, &(i, j)) in edges.iter().enumerate() {
            incidence[i].push(IncidentEdge {
                edge: e,
                neighbor: j,
                is_first: true,
            });
            incidence[j].push(IncidentEdge {
                edge: e,
                neighbor: i,
                is_first: false,
            });
        }
        Ok(Graph {
            num_nodes,
            edges,
            incidence,
        })
    }

    /// Number of nodes.
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of edges.
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge list in canonical orientation, in storage order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Endpoints of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Edges incident to `node`, in increasing edge-index order.
    pub fn incident(&self, node: usize) -> &[IncidentEdge] {
        &self.incidence[node]
    }
}

/// The triangle graph on three nodes (edges (0,1), (0,2), (1,2)).
pub fn triangle_graph() -> Graph {
    Graph::new(3, vec![(0, 1), (0, 2), (1, 2)]).expect("static graph is valid")
}

/// Grid graph on `rows x cols` pixels in row-major node order.
///
/// Edge order is deterministic: scanning pixels row-major, each pixel links
/// to its right and lower neighbors (and, for [`Neighborhood::Eight`], its
/// lower-left and lower-right neighbors), always oriented `i < j`.
pub fn grid_graph(rows: usize, cols: usize, neighborhood: Neighborhood) -> Graph {
    assert!(rows >= 1 && cols >= 1, "grid must be non-empty");
    let at = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = at(r, c);
            if c + 1 < cols {
                edges.push((i, at(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((i, at(r + 1, c)));
                if neighborhood == Neighborhood::Eight {
                    if c > 0 {
                        edges.push((i, at(r + 1, c - 1)));
                    }
                    if c + 1 < cols {
                        edges.push((i, at(r + 1, c + 1)));
                    }
                }
            }
        }
    }
    Graph::new(rows * cols, edges).expect("grid edges are canonical by construction")
}

/// Uniform-penalty matrix: zero on the diagonal, `weight` off it.
pub fn potts_matrix(num_labels: usize, weight: f64) -> Vec<f64> {
    let mut theta = vec![weight; num_labels * num_labels];
    for k in 0..num_labels {
        theta[k * num_labels + k] = 0.0;
    }
    theta
}

/// Returns whether a square cost matrix equals its transpose bit for bit.
pub(crate) fn is_symmetric(theta: &[f64], n: usize) -> bool {
    for k in 0..n {
        for r in (k + 1)..n {
            if theta[k * n + r].to_bits() != theta[r * n + k].to_bits() {
                return false;
            }
        }
    }
    true
}

/// A pairwise discrete model over a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicalModel {
    graph: Graph,
    num_labels: usize,
    /// `num_nodes x num_labels`, row-major.
    unaries: Vec<f64>,
    /// One `num_labels x num_labels` row-major block per edge.
    pairwise: Vec<f64>,
}

impl GraphicalModel {
    /// Assembles a model from per-node unary vectors and per-edge cost
    /// matrices (row-major, indexed like the graph's edge list).
    pub fn new(
        graph: Graph,
        num_labels: usize,
        unaries: Vec<Vec<f64>>,
        pairwise: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if num_labels < 2 {
            return Err(Error::invalid(format!(
                "need at least two labels, got {num_labels}"
            )));
        }
        if unaries.len() != graph.num_nodes() {
            return Err(Error::invalid(format!(
                "got {} unary vectors for {} nodes",
                unaries.len(),
                graph.num_nodes()
            )));
        }
        if pairwise.len() != graph.num_edges() {
            return Err(Error::invalid(format!(
                "got {} pairwise matrices for {} edges",
                pairwise.len(),
                graph.num_edges()
            )));
        }
        let mut flat_unary = Vec::with_capacity(graph.num_nodes() * num_labels);
        for (i, u) in unaries.iter().enumerate() {
            if u.len() != num_labels {
                return Err(Error::invalid(format!(
                    "unary vector of node {i} has {} entries, expected {num_labels}",
                    u.len()
                )));
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "unary vector of node {i} contains a non-finite entry"
                )));
            }
            flat_unary.extend_from_slice(u);
        }
        let nn = num_labels * num_labels;
        let mut flat_pair = Vec::with_capacity(graph.num_edges() * nn);
        for (e, t) in pairwise.iter().enumerate() {
            let (i, j) = graph.edge(e);
            if t.len() != nn {
                return Err(Error::invalid(format!(
                    "cost matrix of edge ({i}, {j}) has {} entries, expected {nn}",
                    t.len()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "cost matrix of edge ({i}, {j}) contains a non-finite entry"
                )));
            }
            flat_pair.extend_from_slice(t);
        }
        Ok(GraphicalModel {
            graph,
            num_labels,
            unaries: flat_unary,
            pairwise: flat_pair,
        })
    }

    /// The underlying graph.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Number of nodes.
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Number of labels per node.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Unary cost vector of node `i`.
    pub fn unary(&self, i: usize) -> &[f64] {
        &self.unaries[i * self.num_labels..(i + 1) * self.num_labels]
    }

    /// Pairwise cost matrix of edge `e`, row-major
    /// (`row = label of the smaller endpoint`).
    pub fn pairwise(&self, e: usize) -> &[f64] {
        let nn = self.num_labels * self.num_labels;
        &self.pairwise[e * nn..(e + 1) * nn]
    }

    /// Cost of a complete labeling: unary terms in node order plus pairwise
    /// terms in edge order.
    ///
    /// Panics when the labeling has the wrong length or an out-of-range label.
    pub fn discrete_energy(&self, labeling: &[usize]) -> f64 {
        assert_eq!(
            labeling.len(),
            self.num_nodes(),
            "labeling length must match the node count"
        );
        assert!(
            labeling.iter().all(|&x| x < self.num_labels),
            "label out of range"
        );
        let n = self.num_labels;
        let mut total = 0.0;
        for (i, &x) in labeling.iter().enumerate() {
            total += self.unaries[i * n + x];
        }
        let nn = n * n;
        for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
            total += self.pairwise[e * nn + labeling[i] * n + labeling[j]];
        }
        total
    }

    /// Largest absolute entry over all pairwise matrices (0 when edgeless).
    pub fn max_abs_pairwise(&self) -> f64 {
        self.pairwise.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }
}

/// Draws a random binary triangle model.
///
/// The draw order is part of the sampling protocol and must not change:
/// first one uniform `p` in `[0, 1)` per node giving the unary vector
/// `(1/2 - p, p - 1/2)` (nodes 0, 1, 2), then for each edge (0,1), (0,2),
/// (1,2) its four matrix entries row-major, each uniform in `[-2, 2)`.
pub fn sample_triangle_model<R: Rng + ?Sized>(rng: &mut R) -> GraphicalModel {
    let mut unaries = Vec::with_capacity(3);
    for _ in 0..3 {
        let p: f64 = rng.random();
        unaries.push(vec![0.5 - p, p - 0.5]);
    }
    let mut pairwise = Vec::with_capacity(3);
    for _ in 0..3 {
        let t: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        pairwise.push(t);
    }
    GraphicalModel::new(triangle_graph(), 2, unaries, pairwise)
        .expect("sampled model is structurally valid")
}
