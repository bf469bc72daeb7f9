//! Frozen-value certification of the exact solvers on a triangle model whose
//! local-polytope relaxation is strictly loose. Every expected number below
//! was computed by hand from the cost tables before the solvers existed.

use wam_core::model::{triangle_graph, GraphicalModel};
use wam_core::oracle::{brute_force_min, k3_objective, lp_local, lp_marginal};

/// A binary triangle whose local-polytope optimum is fractional: the relaxed
/// minimum (-3.5685) undercuts the discrete minimum (-3.0802) and sits at
/// the all-halves vertex.
fn loose_triangle_model() -> GraphicalModel {
    GraphicalModel::new(
        triangle_graph(),
        2,
        vec![
            vec![-0.2261, 0.2261],
            vec![-0.4449, 0.4449],
            vec![-0.3202, 0.3202],
        ],
        vec![
            vec![-0.9184, -1.6252, -1.8891, -0.9807],
            vec![0.3590, 0.0958, -1.8668, 1.5193],
            vec![1.2147, -1.5215, -0.3302, -0.0459],
        ],
    )
    .unwrap()
}

#[test]
fn discrete_energies_match_hand_computation() {
    let model = loose_triangle_model();
    let expected = [
        ([0, 0, 0], -0.3359),
        ([0, 0, 1], -2.6949),
        ([0, 1, 0], -1.6978),
        ([0, 1, 1], -1.0363),
        ([1, 0, 0], -3.0802),
        ([1, 0, 1], -1.7899),
        ([1, 1, 0], -2.8269),
        ([1, 1, 1], 1.4839),
    ];
    for (labeling, energy) in expected {
        let got = model.discrete_energy(&labeling);
        assert!(
            (got - energy).abs() < 1e-12,
            "E{labeling:?} = {got}, expected {energy}"
        );
    }
}

#[test]
fn moment_objective_coefficients_match_hand_computation() {
    let objective = k3_objective(&loose_triangle_model()).unwrap();
    let expected_linear = [-2.7443, -1.3619, -2.3590, 1.6152, 3.6493, 3.0205];
    for (got, want) in objective.linear.iter().zip(expected_linear.iter()) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    assert!((objective.offset - (-0.3359)).abs() < 1e-12);
}

#[test]
fn brute_force_finds_the_frozen_optimum() {
    let model = loose_triangle_model();
    let (labeling, energy) = brute_force_min(&model).unwrap();
    assert_eq!(labeling, vec![1, 0, 0]);
    assert!((energy - (-3.0802)).abs() < 1e-12);
}

#[test]
fn marginal_lp_equals_brute_force_on_the_frozen_model() {
    let model = loose_triangle_model();
    let (labeling, energy) = brute_force_min(&model).unwrap();
    let lp = lp_marginal(&model).unwrap();
    assert_eq!(lp.value, energy, "values must agree bit for bit");
    assert_eq!(lp.labeling.unwrap().to_vec(), labeling);
    assert_eq!(lp.point, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn local_lp_is_strictly_loose_at_the_all_halves_vertex() {
    let model = loose_triangle_model();
    let local = lp_local(&model).unwrap();
    assert!((local.value - (-3.5685)).abs() < 1e-12, "{}", local.value);
    assert_eq!(local.point, [0.5, 0.5, 0.5, 0.0, 0.0, 0.0]);
    assert!(local.labeling.is_none());
    // First fractional vertex in the canonical ordering.
    assert_eq!(local.vertex_index, 8);
    let marginal = lp_marginal(&model).unwrap();
    assert!(local.value < marginal.value - 0.4);
}

#[test]
fn fractional_vertex_values_match_hand_computation() {
    let objective = k3_objective(&loose_triangle_model()).unwrap();
    let cases = [
        ([0.5, 0.5, 0.5, 0.0, 0.0, 0.0], -3.5685),
        ([0.5, 0.5, 0.5, 0.5, 0.5, 0.0], -0.93625),
        ([0.5, 0.5, 0.5, 0.5, 0.0, 0.5], -1.25065),
        ([0.5, 0.5, 0.5, 0.0, 0.5, 0.5], -0.2336),
    ];
    for (point, value) in cases {
        let got = objective.value(&point);
        assert!((got - value).abs() < 1e-12, "{got} vs {value}");
    }
}
