//! Synthetic five-region labeling benchmark.
//!
//! A square image is split into five regions — top, bottom, center square,
//! left, right — each filled with its own palette color, then a fixed
//! fraction of pixels is resampled to a uniformly random palette color. The
//! layout guarantees that the top/bottom pair and the left/right pair are
//! never four-adjacent in the ground truth, so a prior that penalizes
//! exactly those two transitions ten times harder than any other disagreement
//! can be compared against a uniform one on equal footing: accuracy against
//! the known truth, plus a count of forbidden adjacencies in the output.

use rand::Rng;
use wam_core::image::{Image, Palette};
use wam_core::Result;

use crate::sampling::model_rng;

/// Number of region labels.
pub const NUM_LABELS: usize = 5;

/// Label indices by region role.
pub const TOP: usize = 0;
pub const BOTTOM: usize = 1;
pub const CENTER: usize = 2;
pub const LEFT: usize = 3;
pub const RIGHT: usize = 4;

/// The two label pairs the exclusion prior forbids across an edge.
pub const EXCLUDED_PAIRS: [(usize, usize); 2] = [(TOP, BOTTOM), (LEFT, RIGHT)];

/// Region colors, one RGB triple per label.
pub fn region_palette() -> Palette {
    Palette::new(vec![
        vec![61, 38, 168],   // top: deep blue
        vec![50, 123, 252],  // bottom: light blue
        vec![24, 191, 181],  // center: teal
        vec![209, 191, 39],  // left: olive
        vec![249, 250, 20],  // right: yellow
    ])
    .expect("five RGB colors form a valid palette")
}

/// Pairwise costs: 0 on the diagonal, 1 for the two excluded pairs, 0.1 for
/// every other disagreement.
pub fn exclusion_prior() -> Vec<f64> {
    let mut prior = vec![0.0; NUM_LABELS * NUM_LABELS];
    for a in 0..NUM_LABELS {
        for b in 0..NUM_LABELS {
            let pair = (a.min(b), a.max(b));
            prior[a * NUM_LABELS + b] = if a == b {
                0.0
            } else if EXCLUDED_PAIRS.contains(&pair) {
                1.0
            } else {
                0.1
            };
        }
    }
    prior
}

/// Ground-truth label at relative coordinates `(u, v)` in `[0, 1)^2`
/// (`u` horizontal, `v` vertical). The center square covers the middle
/// half; outside it the axis with the larger distance from the middle
/// decides between top/bottom and left/right, vertical winning ties.
fn region_at(u: f64, v: f64) -> usize {
    let du = (u - 0.5).abs();
    let dv = (v - 0.5).abs();
    if du < 0.25 && dv < 0.25 {
        CENTER
    } else if dv >= du {
        if v < 0.5 {
            TOP
        } else {
            BOTTOM
        }
    } else if u < 0.5 {
        LEFT
    } else {
        RIGHT
    }
}

/// Ground-truth labeling in row-major pixel order.
pub fn truth_labels(width: usize, height: usize) -> Vec<usize> {
    let mut labels = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let u = (c as f64 + 0.5) / width as f64;
            let v = (r as f64 + 0.5) / height as f64;
            labels.push(region_at(u, v));
        }
    }
    labels
}

/// Renders a labeling with the benchmark palette.
pub fn render_labels(labels: &[usize], width: usize, height: usize) -> Result<Image> {
    let palette = region_palette();
    let mut data = Vec::with_capacity(labels.len() * 3);
    for &l in labels {
        data.extend_from_slice(palette.color(l));
    }
    Image::new(width, height, 3, data)
}

/// Builds the corrupted benchmark image together with its ground truth:
/// each pixel independently keeps its region color with probability
/// `1 - noise`, otherwise it is recolored to a uniformly random label.
pub fn benchmark_image(
    width: usize,
    height: usize,
    noise: f64,
    seed: u64,
) -> Result<(Image, Vec<usize>)> {
    let truth = truth_labels(width, height);
    let palette = region_palette();
    let mut rng = model_rng(seed, 0);
    let mut data = Vec::with_capacity(truth.len() * 3);
    for &label in &truth {
        let shown = if rng.random::<f64>() < noise {
            rng.random_range(0..NUM_LABELS)
        } else {
            label
        };
        data.extend_from_slice(palette.color(shown));
    }
    Ok((Image::new(width, height, 3, data)?, truth))
}

/// Fraction of labels agreeing with the truth.
pub fn labeling_accuracy(labels: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(labels.len(), truth.len(), "labeling length mismatch");
    let hits = labels.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Number of four-adjacent pixel pairs whose labels form one of `pairs`
/// (unordered).
pub fn adjacent_pair_count(
    labels: &[usize],
    width: usize,
    height: usize,
    pairs: &[(usize, usize)],
) -> usize {
    assert_eq!(labels.len(), width * height, "labeling shape mismatch");
    let hit = |a: usize, b: usize| pairs.contains(&(a.min(b), a.max(b)));
    let mut count = 0;
    for r in 0..height {
        for c in 0..width {
            let here = labels[r * width + c];
            if c + 1 < width && hit(here, labels[r * width + c + 1]) {
                count += 1;
            }
            if r + 1 < height && hit(here, labels[(r + 1) * width + c]) {
                count += 1;
            }
        }
    }
    count
}
