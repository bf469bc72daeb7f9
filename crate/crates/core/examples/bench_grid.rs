// Throwaway feasibility probe for the 128x128 five-label benchmark.
use std::time::Instant;
use wam_core::flow::{flow_step, smoothed_energy, FlowParams};
use wam_core::model::{grid_graph, GraphicalModel, Neighborhood};
use wam_core::transport::{sinkhorn, SinkhornParams};

fn exclusion_prior() -> Vec<f64> {
    let mut prior = vec![0.0; 25];
    for a in 0..5 {
        for b in 0..5 {
            prior[a * 5 + b] = if a == b {
                0.0
            } else if (a.min(b), a.max(b)) == (0, 1) || (a.min(b), a.max(b)) == (3, 4) {
                1.0
            } else {
                0.1
            };
        }
    }
    prior
}

fn build_model(side: usize) -> GraphicalModel {
    let labels = 5usize;
    let graph = grid_graph(side, side, Neighborhood::Four);
    let mut state = 0x243F6A8885A308D3u64;
    let mut rnd = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let rho = 15.0;
    let mut unaries = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let truth = if r < side / 2 {
                (c * labels / side).min(labels - 1)
            } else {
                (r * labels / side).min(labels - 1)
            };
            let observed = if rnd() < 0.4 {
                (rnd() * labels as f64) as usize % labels
            } else {
                truth
            };
            let mut u = vec![0.0; labels];
            for (l, slot) in u.iter_mut().enumerate() {
                let d = if l == observed { 0.0 } else { 1.5 };
                *slot = d / rho;
            }
            unaries.push(u);
        }
    }
    let pairwise = vec![exclusion_prior(); graph.num_edges()];
    GraphicalModel::new(graph, labels, unaries, pairwise).unwrap()
}

fn main() {
    // Microbenchmark: one stiff edge solve at uniform marginals.
    for log_domain in [false, true] {
        let params = SinkhornParams {
            tolerance: 1e-8,
            max_iters: 100_000,
            log_domain,
        };
        let prior = exclusion_prior();
        let mu = vec![0.2; 5];
        let t0 = Instant::now();
        let reps = 200;
        let mut iters = 0usize;
        for _ in 0..reps {
            let sol = sinkhorn(&prior, &mu, &mu, 0.01, &params).unwrap();
            iters += sol.iterations;
        }
        println!(
            "edge solve (log_domain={log_domain}): {:?}/solve, avg iterations {}",
            t0.elapsed() / reps,
            iters / reps as usize
        );
    }

    // Full-loop timing: first iterations of the 128x128 protocol run.
    for log_domain in [false, true] {
        let side = 128usize;
        let model = build_model(side);
        let mut params = FlowParams {
            tau: 0.01,
            alpha: 0.01,
            step: 0.1,
            entropy_threshold: 1e-4,
            max_iters: 3000,
            ..FlowParams::default()
        };
        params.sinkhorn.max_iters = 100_000;
        params.sinkhorn.log_domain = log_domain;
        let mut w =
            wam_core::AssignmentMatrix::barycenter(model.graph().num_nodes(), model.num_labels());
        println!("-- 128x128 protocol, log_domain={log_domain} (flow_step has no warm start)");
        for it in 0..6 {
            let t0 = Instant::now();
            w = flow_step(&model, &w, &params).unwrap();
            println!(
                "  iter {it}: {:?}  entropy {:.4}",
                t0.elapsed(),
                w.normalized_entropy()
            );
        }
        let t0 = Instant::now();
        let e = smoothed_energy(&model, &w, &params).unwrap();
        println!("  energy eval: {:?} (E = {e:.3})", t0.elapsed());
    }
}
