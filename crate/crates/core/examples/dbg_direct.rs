use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wam_core::flow::{flow_step, smoothed_energy, FlowParams};
use wam_core::model::{sample_triangle_model, GraphicalModel};
use wam_core::AssignmentMatrix;

fn max_strength(model: &GraphicalModel) -> f64 {
    (0..model.graph().num_edges())
        .map(|e| {
            let t = model.pairwise(e);
            (t[0] + t[3] - t[1] - t[2]).abs()
        })
        .fold(0.0, f64::max)
}

/// Worst single-step energy rise over `steps` flow steps from the barycenter.
fn worst_rise(model: &GraphicalModel, step: f64, steps: usize) -> f64 {
    let params = FlowParams {
        alpha: 0.0,
        step,
        ..FlowParams::default()
    };
    let mut w = AssignmentMatrix::barycenter(3, 2);
    let mut prev = smoothed_energy(model, &w, &params).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..steps {
        w = flow_step(model, &w, &params).unwrap();
        let e = smoothed_energy(model, &w, &params).unwrap();
        worst = worst.max(e - prev);
        prev = e;
    }
    worst
}

fn main() {
    let trials = 400;

    // Rise rate vs step size.
    for &h in &[0.01, 0.002, 0.0005] {
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        let mut rising = 0;
        let mut magnitudes = Vec::new();
        for _ in 0..trials {
            let m = sample_triangle_model(&mut rng);
            let r = worst_rise(&m, h, 200);
            if r > 1e-9 {
                rising += 1;
                magnitudes.push(r);
            }
        }
        magnitudes.sort_by(f64::total_cmp);
        let med = magnitudes.get(magnitudes.len() / 2).copied().unwrap_or(0.0);
        let big = magnitudes.iter().filter(|&&r| r > 1e-6).count();
        println!(
            "h = {h:<7}: {rising}/{trials} rise (median rise {med:.2e}, {big} exceed 1e-6)"
        );
    }

    // Regime boundary: worst rise as a function of the strongest edge coupling.
    let mut rng = ChaCha8Rng::seed_from_u64(2000);
    let mut boundary: Vec<(f64, f64)> = Vec::new();
    for _ in 0..600 {
        let m = sample_triangle_model(&mut rng);
        boundary.push((max_strength(&m), worst_rise(&m, 0.01, 200)));
    }
    boundary.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut strongest_clean = 0.0f64;
    let mut weakest_rising = f64::INFINITY;
    for &(c, r) in &boundary {
        if r <= 1e-9 {
            strongest_clean = strongest_clean.max(c);
        } else {
            weakest_rising = weakest_rising.min(c);
        }
    }
    println!("weakest coupling that rises: {weakest_rising:.3}");
    println!("strongest coupling that stays monotone: {strongest_clean:.3}");
    for lim in [1.0, 1.5, 2.0, 2.5, 3.0] {
        let kept: Vec<_> = boundary.iter().filter(|&&(c, _)| c <= lim).collect();
        let bad = kept.iter().filter(|&&&(_, r)| r > 1e-9).count();
        println!("  max |c| <= {lim}: {bad}/{} rise", kept.len());
    }
}
