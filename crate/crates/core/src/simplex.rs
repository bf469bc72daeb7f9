//! Geometry of the open probability simplex and of row-stochastic states.
//!
//! A point of the simplex is represented as a `&[f64]` / `Vec<f64>` with
//! strictly positive entries summing to one (within `SUM_TOLERANCE`); a
//! tangent vector is a `Vec<f64>` summing to zero. [`AssignmentMatrix`]
//! stacks one simplex point per node and is the state the flow evolves.
//!
//! Conventions used throughout:
//! * the tangent space at every interior point is the fixed subspace
//!   `{v : <1, v> = 0}`, with orthogonal projection
//!   `project_tangent(x) = x - mean(x) * 1`;
//! * the exponential-type chart at base point `p` is
//!   `lift(p, x) = p .* exp(x) / <p, exp(x)>`, with inverse
//!   `lift_inverse(p, q) = project_tangent(log(q ./ p))`;
//! * entropy is measured in nats.

use crate::error::{Error, Result};

/// Allowed deviation of a distribution's entries from summing to one.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Default positivity floor used by the normalization safeguard.
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// Uniform distribution over `n` labels (the simplex barycenter).
///
/// Requires `n >= 2`.
pub fn barycenter(n: usize) -> Vec<f64> {
    assert!(n >= 2, "a label space needs at least two labels");
    vec![1.0 / n as f64; n]
}

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::invalid(format!(
            "{what} must have at least 2 entries, got {}",
            x.len()
        )));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} contains non-finite entry {bad}")));
    }
    Ok(())
}

/// Validates that `w` is a strictly positive distribution.
pub fn check_distribution(w: &[f64]) -> Result<()> {
    check_finite(w, "distribution")?;
    if let Some(bad) = w.iter().find(|&&v| v <= 0.0) {
        return Err(Error::degenerate(format!(
            "distribution entry {bad} is not strictly positive"
        )));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "distribution sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Orthogonal projection onto the tangent space `{v : <1, v> = 0}`.
///
/// Errors on non-finite input or fewer than two entries.
pub fn project_tangent(x: &[f64]) -> Result<Vec<f64>> {
    check_finite(x, "vector")?;
    let mut out = x.to_vec();
    project_tangent_in_place(&mut out);
    Ok(out)
}

/// In-place projection; input is assumed finite.
pub(crate) fn project_tangent_in_place(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

/// Chart map at base point `p`: `p .* exp(x)` normalized to sum one.
///
/// Overflow-safe (the maximum of `x` is subtracted before exponentiating).
/// The output is strictly positive whenever `p` is.
pub fn lift(p: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_distribution(p)?;
    check_finite(x, "tangent vector")?;
    if p.len() != x.len() {
        return Err(Error::invalid(format!(
            "length mismatch: base point has {} entries, tangent vector {}",
            p.len(),
            x.len()
        )));
    }
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = p
        .iter()
        .zip(x.iter())
        .map(|(&pi, &xi)| pi * (xi - max).exp())
        .collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    Ok(out)
}

/// Inverse chart map: the tangent vector carrying `p` to `q` under [`lift`].
///
/// Errors (degenerate input) when an entry of `p` or `q` is at or below
/// `floor`, since the logarithm would be unreliable there.
pub fn lift_inverse(p: &[f64], q: &[f64], floor: f64) -> Result<Vec<f64>> {
    check_distribution(p)?;
    check_distribution(q)?;
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "length mismatch: base point has {} entries, target {}",
            p.len(),
            q.len()
        )));
    }
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi < floor || qi < floor {
            return Err(Error::degenerate(format!(
                "entry below positivity floor {floor:.1e}; \
                 the chart inverse is unreliable this close to the boundary"
            )));
        }
    }
    let mut out: Vec<f64> = p
        .iter()
        .zip(q.iter())
        .map(|(&pi, &qi)| (qi / pi).ln())
        .collect();
    project_tangent_in_place(&mut out);
    Ok(out)
}

/// Entropy (nats) of a single nonnegative vector; `0 * ln 0` counts as zero.
pub fn entropy(w: &[f64]) -> f64 {
    w.iter()
        .map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 })
        .sum()
}

/// Rectifies a row in place when any entry falls below `floor`:
/// `w <- (w - min(w) + floor) / sum(...)`. Rows already above the floor are
/// left untouched bit for bit. Returns whether the row was rectified.
///
/// After rectification every entry is at least `floor / (1 + n * floor)` and
/// the row sums to one.
pub fn safeguard_row(w: &mut [f64], floor: f64) -> bool {
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= floor {
        return false;
    }
    for v in w.iter_mut() {
        *v = *v - min + floor;
    }
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    true
}

/// Row-stochastic state: one strictly positive distribution per node.
///
/// Stored row-major (`num_nodes x num_labels`). This is both a point of the
/// product-of-simplices manifold and the relaxed labeling the flow rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    num_nodes: usize,
    num_labels: usize,
    data: Vec<f64>,
}

impl AssignmentMatrix {
    /// The maximally uncertain state: every row uniform.
    pub fn barycenter(num_nodes: usize, num_labels: usize) -> Self {
        assert!(num_nodes >= 1, "need at least one node");
        assert!(num_labels >= 2, "need at least two labels");
        AssignmentMatrix {
            num_nodes,
            num_labels,
            data: vec![1.0 / num_labels as f64; num_nodes * num_labels],
        }
    }

    /// Builds a state from explicit rows, validating each as a strictly
    /// positive distribution.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("state needs at least one row"));
        }
        let num_labels = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * num_labels);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_labels {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {num_labels}",
                    row.len()
                )));
            }
            check_distribution(row)
                .map_err(|e| Error::invalid(format!("row {i}: {e}")))?;
            data.extend_from_slice(row);
        }
        Ok(AssignmentMatrix {
            num_nodes: rows.len(),
            num_labels,
            data,
        })
    }

    /// Number of nodes (rows).
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of labels (columns).
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.num_labels..(i + 1) * self.num_labels]
    }

    /// Mutable row `i`.
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.num_labels..(i + 1) * self.num_labels]
    }

    /// Flat row-major view of all entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Total entropy: sum of row entropies, in nats.
    pub fn entropy(&self) -> f64 {
        (0..self.num_nodes).map(|i| entropy(self.row(i))).sum()
    }

    /// Entropy normalized to `[0, 1]`: `entropy / (num_nodes * ln(num_labels))`.
    /// Equals 1 at the barycenter and tends to 0 at labelings.
    pub fn normalized_entropy(&self) -> f64 {
        self.entropy() / (self.num_nodes as f64 * (self.num_labels as f64).ln())
    }

    /// Applies [`safeguard_row`] to every row; returns how many rows were
    /// rectified.
    pub fn safeguard(&mut self, floor: f64) -> usize {
        let n = self.num_labels;
        self.data
            .chunks_mut(n)
            .map(|row| safeguard_row(row, floor) as usize)
            .sum()
    }

    /// Per-row argmax; ties resolve to the smallest label index.
    pub fn argmax_labeling(&self) -> Vec<usize> {
        (0..self.num_nodes)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0usize;
                for (k, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    /// Largest entrywise change against another state of the same shape.
    pub fn max_abs_change(&self, other: &AssignmentMatrix) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn projection_centers_the_vector() {
        let t = project_tangent(&[1.0, 2.0, 3.0]).unwrap();
        assert_close(&t, &[-1.0, 0.0, 1.0], 1e-15);
    }

    #[test]
    fn projection_is_idempotent() {
        let t = project_tangent(&[0.3, -1.7, 5.0, 2.2]).unwrap();
        let t2 = project_tangent(&t).unwrap();
        assert_close(&t, &t2, 1e-15);
    }

    #[test]
    fn projection_rejects_non_finite() {
        assert!(matches!(
            project_tangent(&[1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            project_tangent(&[1.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn lift_of_zero_is_identity() {
        let p = vec![0.2, 0.5, 0.3];
        let q = lift(&p, &[0.0, 0.0, 0.0]).unwrap();
        assert_close(&q, &p, 1e-15);
    }

    #[test]
    fn lift_handles_large_arguments() {
        // Without max-subtraction exp(800) would overflow.
        let p = barycenter(2);
        let q = lift(&p, &[800.0, -800.0]).unwrap();
        assert!(q[0] > 0.999_999);
        assert!(q[1] >= 0.0 && q.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn chart_inverse_matches_hand_value() {
        // q = (e, 1) / (1 + e) seen from the barycenter is the tangent
        // direction (1/2, -1/2).
        let p = barycenter(2);
        let q = vec![E / (1.0 + E), 1.0 / (1.0 + E)];
        let v = lift_inverse(&p, &q, DEFAULT_FLOOR).unwrap();
        assert_close(&v, &[0.5, -0.5], 1e-12);
    }

    #[test]
    fn chart_roundtrip() {
        let p = vec![0.1, 0.2, 0.3, 0.4];
        let v = project_tangent(&[0.7, -0.2, 0.1, 1.3]).unwrap();
        let q = lift(&p, &v).unwrap();
        let v2 = lift_inverse(&p, &q, DEFAULT_FLOOR).unwrap();
        assert_close(&v, &v2, 1e-12);
    }

    #[test]
    fn chart_inverse_rejects_boundary_points() {
        let p = barycenter(2);
        let q = vec![1.0 - 1e-12, 1e-12];
        assert!(matches!(
            lift_inverse(&p, &q, DEFAULT_FLOOR),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn entropy_of_uniform_state() {
        let w = AssignmentMatrix::barycenter(3, 4);
        assert!((w.entropy() - 3.0 * 4.0_f64.ln()).abs() < 1e-12);
        assert!((w.normalized_entropy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_coin() {
        assert!((entropy(&[0.5, 0.5]) - 2.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_near_vertex_is_small() {
        // A floor-rectified vertex has entropy ~ (n-1) * floor * |ln floor|.
        let mut row = vec![1.0, 0.0, 0.0, 0.0];
        safeguard_row(&mut row, DEFAULT_FLOOR);
        assert!(entropy(&row) < 1e-8);
    }

    #[test]
    fn safeguard_is_noop_above_floor() {
        let mut row = vec![0.25, 0.25, 0.25, 0.25];
        let before = row.clone();
        assert!(!safeguard_row(&mut row, DEFAULT_FLOOR));
        // Bit-for-bit unchanged.
        for (a, b) in row.iter().zip(before.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn safeguard_rectifies_boundary_rows() {
        let floor = DEFAULT_FLOOR;
        let mut row = vec![1.0, 0.0];
        assert!(safeguard_row(&mut row, floor));
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        let lower = floor / (1.0 + 2.0 * floor);
        assert!(row.iter().all(|&v| v >= lower));
        // Ordering is preserved and the big entry stays big.
        assert!(row[0] > 0.999_999_9);
    }

    #[test]
    fn safeguard_handles_negative_entries() {
        // Tiny negative drift (e.g. from subtraction) is pushed back inside.
        let mut row = vec![1.0 + 1e-12, -1e-12];
        assert!(safeguard_row(&mut row, DEFAULT_FLOOR));
        assert!(row.iter().all(|&v| v > 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn argmax_ties_break_to_smallest_index() {
        let w = AssignmentMatrix::from_rows(&[
            vec![0.4, 0.4, 0.2],
            vec![0.2, 0.4, 0.4],
        ])
        .unwrap();
        assert_eq!(w.argmax_labeling(), vec![0, 1]);
    }

    #[test]
    fn from_rows_validates() {
        assert!(AssignmentMatrix::from_rows(&[vec![0.5, 0.6]]).is_err());
        assert!(AssignmentMatrix::from_rows(&[vec![1.0, 0.0]]).is_err());
        assert!(
            AssignmentMatrix::from_rows(&[vec![0.5, 0.5], vec![0.3, 0.3, 0.4]])
                .is_err()
        );
    }
}
