//! Randomized invariants of the geometry, the edge solver, and the model
//! serialization.

use proptest::prelude::*;
use wam_core::model::{Graph, GraphicalModel};
use wam_core::model_io::{model_to_string, parse_model};
use wam_core::simplex::{
    barycenter, check_distribution, entropy, lift, lift_inverse, project_tangent, safeguard_row,
};
use wam_core::transport::{sinkhorn, wasserstein_message, SinkhornParams};

/// A strictly interior distribution of the given size.
fn interior_distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        let n = raw.len() as f64;
        raw.iter().map(|&r| 0.9 * r / sum + 0.1 / n).collect()
    })
}

fn small_reals(count: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, count)
}

proptest! {
    #[test]
    fn tangent_projection_sums_to_zero_and_is_idempotent(x in small_reals(5)) {
        let p = project_tangent(&x).unwrap();
        let sum: f64 = p.iter().sum();
        prop_assert!(sum.abs() < 1e-12);
        let pp = project_tangent(&p).unwrap();
        for (a, b) in p.iter().zip(pp.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_projection_kills_constant_shifts(x in small_reals(4), c in -5.0f64..5.0) {
        let shifted: Vec<f64> = x.iter().map(|&v| v + c).collect();
        let a = project_tangent(&x).unwrap();
        let b = project_tangent(&shifted).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn chart_roundtrip_recovers_the_projected_vector(
        p in interior_distribution(4),
        x in small_reals(4),
    ) {
        let q = lift(&p, &x).unwrap();
        prop_assert!(check_distribution(&q).is_ok());
        let back = lift_inverse(&p, &q, 1e-12).unwrap();
        let projected = project_tangent(&x).unwrap();
        for (a, b) in back.iter().zip(projected.iter()) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn entropy_is_bounded_by_the_uniform_distribution(p in interior_distribution(5)) {
        let h = entropy(&p);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= entropy(&barycenter(5)) + 1e-12);
    }

    #[test]
    fn safeguard_returns_a_distribution_off_the_boundary(
        mut w in prop::collection::vec(0.0f64..1.0, 4),
        floor in 1e-12f64..1e-4,
    ) {
        let sum: f64 = w.iter().sum();
        prop_assume!(sum > 1e-6);
        for v in w.iter_mut() {
            *v /= sum;
        }
        safeguard_row(&mut w, floor);
        prop_assert!(check_distribution(&w).is_ok());
        let min = w.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        // Rectification maps the smallest entry to floor / (1 + n*floor) at
        // worst, which stays above floor / 2 for the floors used here.
        prop_assert!(min >= floor / 2.0);
    }

    #[test]
    fn converged_couplings_satisfy_both_marginals(
        theta in small_reals(9),
        mu1 in interior_distribution(3),
        mu2 in interior_distribution(3),
    ) {
        let scaled: Vec<f64> = theta.iter().map(|&t| t / 5.0).collect();
        let params = SinkhornParams { max_iters: 200_000, ..SinkhornParams::default() };
        let sol = sinkhorn(&scaled, &mu1, &mu2, 0.1, &params).unwrap();
        let mut violation = 0.0f64;
        for r in 0..3 {
            let row_sum: f64 = sol.coupling[r * 3..(r + 1) * 3].iter().sum();
            violation += (row_sum - mu1[r]).abs();
        }
        for c in 0..3 {
            let col_sum: f64 = (0..3).map(|r| sol.coupling[r * 3 + c]).sum();
            violation += (col_sum - mu2[c]).abs();
        }
        prop_assert!(violation <= 1e-8 + 1e-12, "violation {violation}");
    }

    #[test]
    fn messages_live_in_the_tangent_space(
        theta in small_reals(4),
        mu1 in interior_distribution(2),
        mu2 in interior_distribution(2),
    ) {
        let scaled: Vec<f64> = theta.iter().map(|&t| t / 5.0).collect();
        let params = SinkhornParams { max_iters: 200_000, ..SinkhornParams::default() };
        let msg = wasserstein_message(&scaled, &mu1, &mu2, 0.1, &params).unwrap();
        prop_assert!(msg.to_first.iter().sum::<f64>().abs() < 1e-9);
        prop_assert!(msg.to_second.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn serialization_roundtrips_models_exactly(
        unary_values in prop::collection::vec(-1e6f64..1e6, 6),
        pairwise_values in prop::collection::vec(-1e6f64..1e6, 8),
    ) {
        let graph = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let unaries: Vec<Vec<f64>> = unary_values.chunks(2).map(|c| c.to_vec()).collect();
        let pairwise: Vec<Vec<f64>> = pairwise_values.chunks(4).map(|c| c.to_vec()).collect();
        let model = GraphicalModel::new(graph, 2, unaries, pairwise).unwrap();
        let text = model_to_string(&model);
        let reread = parse_model(&text).unwrap();
        // The canonical form is a fixed point of write . read.
        prop_assert_eq!(model_to_string(&reread), text);
        for i in 0..3 {
            prop_assert_eq!(reread.unary(i), model.unary(i));
        }
        for e in 0..2 {
            prop_assert_eq!(reread.pairwise(e), model.pairwise(e));
        }
    }
}
