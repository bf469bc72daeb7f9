//! Throwaway timing probe for the five-region benchmark budget.

use std::io::Write as _;
use std::time::Instant;

use wam_cli::regions::{
    adjacent_pair_count, benchmark_image, exclusion_prior, labeling_accuracy, region_palette,
    EXCLUDED_PAIRS,
};
use wam_core::flow::{solve_with, FlowParams, FlowStatus, TraceOptions};
use wam_core::image::model_from_image;
use wam_core::model::{potts_matrix, Neighborhood};
use wam_core::transport::SinkhornParams;

fn eprint_flush(line: &str) {
    let mut err = std::io::stderr();
    let _ = writeln!(err, "{line}");
    let _ = err.flush();
}

fn protocol_params(max_iters: usize) -> FlowParams {
    FlowParams {
        tau: 0.01,
        alpha: 0.01,
        step: 0.1,
        entropy_threshold: 1e-4,
        max_iters,
        epsilon_floor: 1e-10,
        sinkhorn: SinkhornParams {
            tolerance: 1e-8,
            max_iters: 100_000,
            log_domain: true,
        },
    }
}

fn run_chunked(side: usize, pairwise: &[f64], cap: usize, tag: &str) {
    let palette = region_palette();
    let (image, truth) = benchmark_image(side, side, 0.4, 7).expect("image");
    let model =
        model_from_image(&image, &palette, 15.0, pairwise, Neighborhood::Four).expect("model");
    let chunk = 25;
    let mut state = None;
    let mut done = 0;
    let start = Instant::now();
    while done < cap {
        let params = protocol_params(chunk.min(cap - done));
        let result = match solve_with(&model, &params, state.take(), &TraceOptions::default()) {
            Ok(result) => result,
            Err(err) => {
                eprint_flush(&format!("{tag} side={side}: ERROR {err}"));
                return;
            }
        };
        done += result.iterations;
        let secs = start.elapsed().as_secs_f64();
        let acc = labeling_accuracy(&result.labeling, &truth);
        let forbidden = adjacent_pair_count(&result.labeling, side, side, &EXCLUDED_PAIRS);
        let entropy = result.assignment.normalized_entropy();
        eprint_flush(&format!(
            "{tag} side={side} iter={done}: {secs:.1}s acc={acc:.4} \
             forbidden={forbidden} entropy={entropy:.3e}"
        ));
        let converged = result.status == FlowStatus::Converged;
        state = Some(result.assignment);
        if converged {
            eprint_flush(&format!("{tag} side={side}: converged at {done}"));
            break;
        }
    }
}

fn main() {
    let prior = exclusion_prior();
    let potts = potts_matrix(5, 0.1);

    run_chunked(128, &prior, 600, "exclusion");
    run_chunked(128, &potts, 600, "potts");
}
