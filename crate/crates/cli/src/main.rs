//! `wam` — labeling of pairwise graphical models by smoothed-transport
//! descent: solve model files, run the fixed triangle study, sweep random
//! triangles over a parameter grid, label images, and self-check gradients.
//!
//! Exit codes: 0 success, 1 usage or parse failure, 2 non-convergence,
//! 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wam_cli::gradcheck::{run_gradcheck, GradCheckConfig};
use wam_cli::sweep::{run_sweep, six_significant, write_sweep_csv, SweepConfig};
use wam_cli::triangle::{run_study, StudyParams};
use wam_core::flow::{solve_with, FlowParams, FlowStatus, TraceOptions};
use wam_core::image::{model_from_image, read_palette_file, read_pnm_file, write_pnm, Image};
use wam_core::model::{potts_matrix, GraphicalModel, Neighborhood};
use wam_core::model_io::read_model_file;
use wam_core::oracle::brute_force_min;
use wam_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "wam",
    version,
    about = "Labeling of pairwise graphical models by smoothed-transport descent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a model file and write the resulting labeling.
    Solve(SolveArgs),
    /// Run the fixed three-node benchmark study and print the report.
    Triangle(TriangleArgs),
    /// Sweep random binary triangles over a (tau, alpha) grid into a CSV.
    SweepK3(SweepArgs),
    /// Label an image against a palette with a pairwise prior.
    LabelImage(LabelImageArgs),
    /// Compare analytic messages and gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Solve a model file exactly by exhaustive enumeration.
    Oracle(OracleArgs),
}

/// Flow settings shared by the solving commands.
#[derive(Args, Debug, Clone)]
struct FlowArgs {
    /// Smoothing strength of the edge distances.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    /// Sharpening exponent of the multiplicative update.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Gradient step size.
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Normalized-entropy convergence threshold.
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
}

impl FlowArgs {
    /// Builds flow parameters, switching the inner solver to its log-domain
    /// form when the smoothing is weak relative to the edge costs.
    fn params(&self, model: &GraphicalModel) -> FlowParams {
        let mut params = FlowParams {
            tau: self.tau,
            alpha: self.alpha,
            step: self.step,
            entropy_threshold: self.threshold,
            max_iters: self.max_iters,
            ..FlowParams::default()
        };
        params.sinkhorn.log_domain = self.tau < 0.02 * model.max_abs_pairwise();
        params
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Model file to minimize.
    model: PathBuf,
    #[command(flatten)]
    flow: FlowArgs,
    /// Write a per-iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Record smoothed and rounded energies in the trace (extra edge solves).
    #[arg(long, requires = "trace")]
    energies: bool,
    /// Output file: one label index per line.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct TriangleArgs {
    /// Smoothing strength.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    /// Gradient step size.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Normalized-entropy convergence threshold.
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Number of sampled models.
    #[arg(long)]
    samples: usize,
    /// Sample seed; model `i` is keyed by (seed, i).
    #[arg(long)]
    seed: u64,
    /// Comma-separated smoothing values.
    #[arg(long, value_delimiter = ',', required = true)]
    tau_grid: Vec<f64>,
    /// Comma-separated sharpening values.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha_grid: Vec<f64>,
    /// Gradient step size.
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Normalized-entropy convergence threshold.
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
    /// Iteration cap per run.
    #[arg(long, default_value_t = 600)]
    max_iters: usize,
    /// Output CSV path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct LabelImageArgs {
    /// Input image (binary PGM or PPM, maxval 255).
    #[arg(long)]
    input: PathBuf,
    /// Palette file: one color per line, components in 0..=255.
    #[arg(long)]
    palette: PathBuf,
    /// Unary scale: label costs are L1 color distances divided by rho.
    #[arg(long)]
    rho: f64,
    /// Pairwise prior: `potts:<weight>` or a path to an n x n matrix file.
    #[arg(long)]
    prior: String,
    /// Grid connectivity.
    #[arg(long, default_value = "n4", value_parser = parse_neighborhood)]
    neighborhood: Neighborhood,
    #[command(flatten)]
    flow: FlowArgs,
    /// Output label map (PGM, gray value = label index).
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the palette-colored reconstruction here.
    #[arg(long)]
    render: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Number of labels per node.
    #[arg(long)]
    labels: usize,
    /// Smoothing strength.
    #[arg(long)]
    tau: f64,
    /// Random instances per check.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Instance seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    /// Model file to enumerate.
    model: PathBuf,
}

fn parse_neighborhood(text: &str) -> Result<Neighborhood, String> {
    match text {
        "n4" => Ok(Neighborhood::Four),
        "n8" => Ok(Neighborhood::Eight),
        other => Err(format!("expected 'n4' or 'n8', got '{other}'")),
    }
}

/// Maps a library error to the documented exit code.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Convergence { .. } => EXIT_NO_CONVERGENCE,
        Error::Stability(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(err))
}

fn write_labels(path: &Path, labeling: &[usize]) -> Result<(), Error> {
    let mut text = String::with_capacity(labeling.len() * 2);
    for &label in labeling {
        text.push_str(&label.to_string());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> ExitCode {
    let model = match read_model_file(&args.model) {
        Ok(model) => model,
        Err(err) => return fail(&err),
    };
    let params = args.flow.params(&model);
    let options = TraceOptions {
        record: args.trace.is_some(),
        record_smoothed_energy: args.energies,
        record_rounded_energy: args.energies,
        check_marginals: false,
    };
    let result = match solve_with(&model, &params, None, &options) {
        Ok(result) => result,
        Err(err) => return fail(&err),
    };
    if let Err(err) = write_labels(&args.output, &result.labeling) {
        return fail(&err);
    }
    if let Some(path) = &args.trace {
        let trace = result.trace.as_ref().expect("tracing was requested");
        let mut out = Vec::new();
        trace.write_csv(&mut out).expect("writing to memory");
        if let Err(err) = fs::write(path, out) {
            return fail(&err.into());
        }
    }
    match result.status {
        FlowStatus::Converged => {
            println!(
                "converged in {} iterations; labels written to {}",
                result.iterations,
                args.output.display()
            );
            ExitCode::SUCCESS
        }
        FlowStatus::MaxIters => {
            eprintln!(
                "hit the iteration cap ({}); labels written to {}",
                result.iterations,
                args.output.display()
            );
            ExitCode::from(EXIT_NO_CONVERGENCE)
        }
    }
}

fn cmd_triangle(args: &TriangleArgs) -> ExitCode {
    let params = StudyParams {
        tau: args.tau,
        step: args.step,
        entropy_threshold: args.threshold,
        ..StudyParams::default()
    };
    match run_study(&params) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(err) => fail(&err),
    }
}

fn cmd_sweep(args: &SweepArgs) -> ExitCode {
    let mut config = SweepConfig::new(args.samples, args.seed);
    config.tau_grid = args.tau_grid.clone();
    config.alpha_grid = args.alpha_grid.clone();
    config.step = args.step;
    config.entropy_threshold = args.threshold;
    config.max_iters = args.max_iters;
    let outcome = match run_sweep(&config) {
        Ok(outcome) => outcome,
        Err(err) => return fail(&err),
    };
    let mut out = Vec::new();
    write_sweep_csv(&outcome, &mut out).expect("writing to memory");
    if let Err(err) = fs::write(&args.output, out) {
        return fail(&err.into());
    }
    println!(
        "swept {} models over {} grid points into {}",
        args.samples,
        outcome.records.len(),
        args.output.display()
    );
    ExitCode::SUCCESS
}

fn load_prior(spec: &str, num_labels: usize) -> Result<Vec<f64>, Error> {
    if let Some(weight) = spec.strip_prefix("potts:") {
        let weight: f64 = weight.parse().map_err(|_| {
            Error::invalid(format!("prior weight '{weight}' is not a number"))
        })?;
        return Ok(potts_matrix(num_labels, weight));
    }
    let text = fs::read_to_string(spec)?;
    let mut entries = Vec::with_capacity(num_labels * num_labels);
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        for word in content.split_whitespace() {
            let value: f64 = word.parse().map_err(|_| {
                Error::parse(idx + 1, format!("expected a number, found '{word}'"))
            })?;
            entries.push(value);
        }
    }
    if entries.len() != num_labels * num_labels {
        return Err(Error::invalid(format!(
            "prior file has {} entries, expected {} for {num_labels} labels",
            entries.len(),
            num_labels * num_labels
        )));
    }
    Ok(entries)
}

fn cmd_label_image(args: &LabelImageArgs) -> ExitCode {
    let run = || -> Result<(FlowStatus, usize), Error> {
        let image = read_pnm_file(&args.input)?;
        let palette = read_palette_file(&args.palette, image.channels())?;
        let prior = load_prior(&args.prior, palette.num_labels())?;
        let model = model_from_image(&image, &palette, args.rho, &prior, args.neighborhood)?;
        let params = args.flow.params(&model);
        let result = solve_with(&model, &params, None, &TraceOptions::default())?;

        let labels: Vec<u8> = result
            .labeling
            .iter()
            .map(|&l| u8::try_from(l).expect("label count fits a byte"))
            .collect();
        let label_map = Image::new(image.width(), image.height(), 1, labels)?;
        if let Some(render) = &args.render {
            let mut data = Vec::with_capacity(result.labeling.len() * palette.channels());
            for &l in &result.labeling {
                data.extend_from_slice(palette.color(l));
            }
            let rendered = Image::new(image.width(), image.height(), palette.channels(), data)?;
            let file = fs::File::create(render)?;
            write_pnm(&rendered, file)?;
        }
        let file = fs::File::create(&args.output)?;
        write_pnm(&label_map, file)?;
        Ok((result.status, result.iterations))
    };
    match run() {
        Ok((status, iterations)) => {
            if status == FlowStatus::Converged {
                println!(
                    "converged in {iterations} iterations; labels written to {}",
                    args.output.display()
                );
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "hit the iteration cap ({iterations}); labels written to {}",
                    args.output.display()
                );
                ExitCode::from(EXIT_NO_CONVERGENCE)
            }
        }
        Err(err) => fail(&err),
    }
}

fn cmd_gradcheck(args: &GradcheckArgs) -> ExitCode {
    let config = GradCheckConfig::new(args.labels, args.tau, args.trials, args.seed);
    match run_gradcheck(&config) {
        Ok(report) => {
            println!(
                "message max relative error  {}",
                six_significant(report.message_max_rel)
            );
            println!(
                "gradient max relative error {}",
                six_significant(report.gradient_max_rel)
            );
            if report.passed() {
                println!("pass ({} trials, tolerance {})", report.trials, report.tolerance);
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "fail: relative error exceeds {} over {} trials",
                    report.tolerance, report.trials
                );
                ExitCode::from(EXIT_NO_CONVERGENCE)
            }
        }
        Err(err) => fail(&err),
    }
}

fn cmd_oracle(args: &OracleArgs) -> ExitCode {
    let model = match read_model_file(&args.model) {
        Ok(model) => model,
        Err(err) => return fail(&err),
    };
    match brute_force_min(&model) {
        Ok((labeling, energy)) => {
            let words: Vec<String> = labeling.iter().map(|l| l.to_string()).collect();
            println!("labeling: {}", words.join(" "));
            println!("energy: {}", six_significant(energy));
            ExitCode::SUCCESS
        }
        Err(err) => fail(&err),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is
            // a usage error with the documented exit code.
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    // Flush stdout promptly when piped.
    let code = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Triangle(args) => cmd_triangle(args),
        Command::SweepK3(args) => cmd_sweep(args),
        Command::LabelImage(args) => cmd_label_image(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    let _ = std::io::stdout().flush();
    code
}
