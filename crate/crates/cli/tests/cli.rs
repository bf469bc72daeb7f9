//! End-to-end tests of the `wam` binary: argument handling, exit codes,
//! file outputs, and output formats.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wam_cli::regions::region_palette;
use wam_cli::triangle::reference_triangle;
use wam_core::image::write_pnm;
use wam_core::model_io::model_to_string;

fn wam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wam"))
        .args(args)
        .output()
        .expect("the binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

fn exit_of(output: &Output) -> i32 {
    output.status.code().expect("the binary exits normally")
}

/// Writes the fixed benchmark triangle to `dir` and returns its path.
fn triangle_file(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("triangle.gmodel");
    fs::write(&path, model_to_string(&reference_triangle())).unwrap();
    path
}

#[test]
fn no_arguments_is_a_usage_error() {
    let output = wam(&[]);
    assert_eq!(exit_of(&output), 1);
    assert!(!stderr_of(&output).is_empty());
}

#[test]
fn help_is_a_success() {
    let output = wam(&["--help"]);
    assert_eq!(exit_of(&output), 0);
    let text = stdout_of(&output);
    for subcommand in ["solve", "triangle", "sweep-k3", "label-image", "gradcheck", "oracle"] {
        assert!(text.contains(subcommand), "help lists {subcommand}");
    }
}

#[test]
fn an_unknown_flag_is_a_usage_error() {
    let output = wam(&["triangle", "--no-such-flag"]);
    assert_eq!(exit_of(&output), 1);
}

#[test]
fn solve_writes_the_labeling_and_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let model = triangle_file(dir.path());
    let labels = dir.path().join("labels.txt");
    let trace = dir.path().join("trace.csv");
    let output = wam(&[
        "solve",
        model.to_str().unwrap(),
        "--tau",
        "0.1",
        "--alpha",
        "0.5",
        "--step",
        "0.5",
        "--threshold",
        "1e-3",
        "--output",
        labels.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--energies",
    ]);
    assert_eq!(exit_of(&output), 0, "stderr: {}", stderr_of(&output));
    assert!(stdout_of(&output).contains("converged"));

    assert_eq!(fs::read_to_string(&labels).unwrap(), "1\n0\n0\n");

    let trace_text = fs::read_to_string(&trace).unwrap();
    let mut lines = trace_text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,norm_entropy,e_tau,rounded_energy"
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,"), "first row is iteration 0: {first}");
    // Iteration count reported on stdout matches the trace length.
    assert!(trace_text.lines().count() > 2);
}

#[test]
fn solve_reports_the_iteration_cap_but_still_writes_labels() {
    let dir = tempfile::tempdir().unwrap();
    let model = triangle_file(dir.path());
    let labels = dir.path().join("labels.txt");
    let output = wam(&[
        "solve",
        model.to_str().unwrap(),
        "--max-iters",
        "1",
        "--output",
        labels.to_str().unwrap(),
    ]);
    assert_eq!(exit_of(&output), 2);
    assert!(stderr_of(&output).contains("iteration cap"));
    assert!(labels.exists(), "labels are written even on a capped run");
}

#[test]
fn a_malformed_model_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.gmodel");
    fs::write(&path, "GMODEL 1\nnodes 2 labels two\n").unwrap();
    let labels = dir.path().join("labels.txt");
    let output = wam(&[
        "solve",
        path.to_str().unwrap(),
        "--output",
        labels.to_str().unwrap(),
    ]);
    assert_eq!(exit_of(&output), 1);
    assert!(stderr_of(&output).contains("error"));
    assert!(!labels.exists());
}

#[test]
fn the_triangle_report_shows_the_known_optima() {
    let output = wam(&["triangle"]);
    assert_eq!(exit_of(&output), 0, "stderr: {}", stderr_of(&output));
    let text = stdout_of(&output);
    assert!(text.contains("local polytope"));
    assert!(text.contains("marginal polytope"));
    // The fractional relaxation sits at (1/2, 1/2, 1/2)...
    assert!(text.contains("0.5000"));
    // ...the exact optimum at -3.0802, and each flow run recovers (1 0 0).
    assert!(text.contains("-3.0802"));
    assert_eq!(text.matches("(1 0 0)").count(), 3);
}

#[test]
fn sweep_csv_is_deterministic_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    for path in [&csv_a, &csv_b] {
        let output = wam(&[
            "sweep-k3",
            "--samples",
            "40",
            "--seed",
            "3",
            "--tau-grid",
            "0.2",
            "--alpha-grid",
            "0.22,0.58",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert_eq!(exit_of(&output), 0, "stderr: {}", stderr_of(&output));
    }
    let text_a = fs::read_to_string(&csv_a).unwrap();
    let text_b = fs::read_to_string(&csv_b).unwrap();
    assert_eq!(text_a, text_b, "repeat runs are byte-identical");

    let lines: Vec<&str> = text_a.lines().collect();
    assert_eq!(
        lines[0],
        "tau,alpha,success_rate,avg_iterations,timeout_rate"
    );
    assert_eq!(lines.len(), 4, "header, two grid rows, one comment");
    for row in &lines[1..3] {
        assert_eq!(row.split(',').count(), 5, "five columns: {row}");
        assert!(row.starts_with("0.200000,"), "tau column first: {row}");
    }
    let comment = lines[3];
    assert!(comment.starts_with("# local_vertex_fractions:"));
    let fractions: Vec<f64> = comment
        .trim_start_matches("# local_vertex_fractions:")
        .trim()
        .split(',')
        .map(|w| w.parse().unwrap())
        .collect();
    assert_eq!(fractions.len(), 12);
    let total: f64 = fractions.iter().sum();
    assert!((total - 1.0).abs() < 1e-9, "fractions sum to one: {total}");
}

#[test]
fn gradcheck_passes_on_a_smooth_instance() {
    let output = wam(&[
        "gradcheck",
        "--labels",
        "3",
        "--tau",
        "0.2",
        "--trials",
        "5",
        "--seed",
        "11",
    ]);
    assert_eq!(exit_of(&output), 0, "stderr: {}", stderr_of(&output));
    assert!(stdout_of(&output).contains("pass"));
}

#[test]
fn label_image_reconstructs_a_noiseless_image() {
    let dir = tempfile::tempdir().unwrap();
    let palette = region_palette();

    // A clean 8x8 five-region image: every pixel is an exact palette color.
    let (image, truth) = wam_cli::regions::benchmark_image(8, 8, 0.0, 1).unwrap();
    let input = dir.path().join("input.ppm");
    write_pnm(&image, fs::File::create(&input).unwrap()).unwrap();

    let palette_path = dir.path().join("palette.txt");
    let mut palette_text = String::new();
    for label in 0..palette.num_labels() {
        let color = palette.color(label);
        palette_text.push_str(&format!("{} {} {}\n", color[0], color[1], color[2]));
    }
    fs::write(&palette_path, palette_text).unwrap();

    let label_map = dir.path().join("labels.pgm");
    let render = dir.path().join("render.ppm");
    let output = wam(&[
        "label-image",
        "--input",
        input.to_str().unwrap(),
        "--palette",
        palette_path.to_str().unwrap(),
        "--rho",
        "15",
        "--prior",
        "potts:0.0",
        "--output",
        label_map.to_str().unwrap(),
        "--render",
        render.to_str().unwrap(),
    ]);
    assert_eq!(exit_of(&output), 0, "stderr: {}", stderr_of(&output));

    // With exact colors and no coupling the labeling is the ground truth...
    let labels = wam_core::image::read_pnm_file(&label_map).unwrap();
    assert_eq!(labels.channels(), 1);
    let found: Vec<usize> = labels.data().iter().map(|&v| v as usize).collect();
    assert_eq!(found, truth);

    // ...and the palette rendering reproduces the input image exactly.
    let rendered = wam_core::image::read_pnm_file(&render).unwrap();
    assert_eq!(rendered.data(), image.data());
}

#[test]
fn a_prior_file_with_the_wrong_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (image, _) = wam_cli::regions::benchmark_image(4, 4, 0.0, 1).unwrap();
    let input = dir.path().join("input.ppm");
    write_pnm(&image, fs::File::create(&input).unwrap()).unwrap();

    let palette = region_palette();
    let palette_path = dir.path().join("palette.txt");
    let mut palette_text = String::new();
    for label in 0..palette.num_labels() {
        let color = palette.color(label);
        palette_text.push_str(&format!("{} {} {}\n", color[0], color[1], color[2]));
    }
    fs::write(&palette_path, palette_text).unwrap();

    let prior_path = dir.path().join("prior.txt");
    fs::write(&prior_path, "0 1\n1 0\n").unwrap(); // 2x2, but 5 labels
    let output = wam(&[
        "label-image",
        "--input",
        input.to_str().unwrap(),
        "--palette",
        palette_path.to_str().unwrap(),
        "--rho",
        "15",
        "--prior",
        prior_path.to_str().unwrap(),
        "--output",
        dir.path().join("labels.pgm").to_str().unwrap(),
    ]);
    assert_eq!(exit_of(&output), 1);
    assert!(stderr_of(&output).contains("expected 25"));
}

#[test]
fn oracle_prints_the_exhaustive_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let model = triangle_file(dir.path());
    let output = wam(&["oracle", model.to_str().unwrap()]);
    assert_eq!(exit_of(&output), 0, "stderr: {}", stderr_of(&output));
    let text = stdout_of(&output);
    assert!(text.contains("labeling: 1 0 0"), "stdout: {text}");
    assert!(text.contains("energy: -3.08020"), "stdout: {text}");
}
