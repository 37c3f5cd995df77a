//! `spdc` command line: solve one problem, run a benchmark spec, generate
//! synthetic data, or plot traces.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

use std::fs;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spdc::dataset::DataSet;
use spdc::trace::ConvergenceTrace;
use spdc_cli::experiment::{run_job, DatasetSpec, ExperimentSpec, Method, SolverSpec};
use spdc_cli::{render_svg, run_experiment, CliError};

#[derive(Parser)]
#[command(
    name = "spdc",
    version,
    about = "Stochastic primal-dual coordinate solvers for regularized ERM"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // constructed once at startup
enum Cmd {
    /// Run one solver on one dataset and write its trace as CSV.
    Solve(SolveArgs),
    /// Run a JSON experiment spec: traces, aggregate, provenance sidecar.
    Bench(BenchArgs),
    /// Generate the synthetic regression dataset as a LIBSVM file.
    Gen(GenArgs),
    /// Render trace CSVs into a log-gap SVG plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct DataArgs {
    /// LIBSVM file to load.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Synthetic dataset as `n,d` samples/features.
    #[arg(long, value_name = "N,D")]
    synthetic: Option<String>,
    /// Seed for the synthetic generator.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Feature-dimension override (useful when splits differ in max index).
    #[arg(long)]
    dim: Option<usize>,
}

impl DataArgs {
    fn to_spec(&self) -> Result<DatasetSpec, CliError> {
        match (&self.data, &self.synthetic) {
            (Some(path), None) => Ok(DatasetSpec::File {
                path: path.clone(),
                dim_override: self.dim,
            }),
            (None, Some(nd)) => {
                let (n, d) = nd
                    .split_once(',')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                    .ok_or_else(|| CliError::usage("--synthetic expects `n,d`"))?;
                Ok(DatasetSpec::Synthetic {
                    n,
                    d,
                    seed: self.data_seed,
                })
            }
            _ => Err(CliError::usage("provide exactly one of --data or --synthetic")),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Loss: squared | smoothed-hinge | logistic | hinge.
    #[arg(long, default_value = "squared")]
    loss: String,
    /// L1 coefficient (elastic net when positive).
    #[arg(long, default_value_t = 0.0)]
    lambda1: f64,
    /// L2 coefficient (the strong-convexity parameter).
    #[arg(long)]
    lambda2: f64,
    /// Solver: spdc | sdca | afg.
    #[arg(long, default_value = "spdc")]
    method: String,
    /// SPDC variant: basic | minibatch | weighted.
    #[arg(long, default_value = "basic")]
    variant: String,
    /// Mini-batch size.
    #[arg(short, long, default_value_t = 1)]
    m: usize,
    /// Equivalent passes over the data.
    #[arg(long)]
    passes: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturbation for non-smooth / non-strongly-convex problems.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Weighted-sampling mix (defaults to the optimal alpha*).
    #[arg(long)]
    alpha: Option<f64>,
    /// Step-size overrides; set all three or none.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Lazy sparse updates.
    #[arg(long)]
    sparse: bool,
    /// AFG step-size override.
    #[arg(long)]
    afg_step: Option<f64>,
    /// Record every k-th pass boundary.
    #[arg(long, default_value_t = 1)]
    cadence: u64,
    /// Add wall-clock milliseconds to the trace (breaks byte-stable output).
    #[arg(long)]
    wall_clock: bool,
    /// Trace the perturbed objective instead of the original one.
    #[arg(long)]
    perturbed_objective: bool,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec (JSON).
    spec: PathBuf,
    /// Output directory (defaults to the spec's output_dir or `bench-out`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output LIBSVM path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV files, plotted in order.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Legend names (defaults to file stems).
    #[arg(long, num_args = 1..)]
    names: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too and must exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Solve(args) => solve(args),
        Cmd::Bench(args) => bench(args),
        Cmd::Gen(args) => gen(args),
        Cmd::Plot(args) => plot(args),
    }
}

fn solve(args: SolveArgs) -> Result<(), CliError> {
    let method = match args.method.as_str() {
        "spdc" => Method::Spdc,
        "sdca" => Method::Sdca,
        "afg" => Method::Afg,
        other => return Err(CliError::usage(format!("unknown method `{other}`"))),
    };
    let spec = SolverSpec {
        name: args.method.clone(),
        method,
        variant: Some(args.variant.clone()),
        m: args.m,
        passes: args.passes,
        delta: args.delta,
        alpha: args.alpha,
        tau: args.tau,
        sigma: args.sigma,
        theta: args.theta,
        sparse: args.sparse,
        afg_step: args.afg_step,
    };
    let ds = args.data.to_spec()?.load()?;
    let loss = spdc::loss::LossModel::new(args.loss.parse()?);
    let reg = spdc::regularizer::Regularizer::elastic_net(args.lambda1, args.lambda2)?;
    let opts = spdc::trace::TraceOptions {
        cadence: args.cadence,
        reference: None,
        wall_clock: args.wall_clock,
        perturbed_objective: args.perturbed_objective,
    };
    let trace = run_job(&ds, loss, reg, &spec, args.seed, &opts)?;
    match args.out {
        Some(path) => {
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            fs::write(path, buf)?;
        }
        None => {
            let stdout = std::io::stdout();
            trace.write_csv(stdout.lock())?;
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.spec.display())))?;
    let spec = ExperimentSpec::from_json(&text)?;
    let out_dir = args
        .out_dir
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("bench-out"));
    let output = run_experiment(&spec, &out_dir)?;
    let mut stdout = std::io::stdout().lock();
    for path in &output.trace_files {
        writeln!(stdout, "{}", path.display())?;
    }
    writeln!(stdout, "{}", output.aggregate_file.display())?;
    writeln!(stdout, "{}", output.sidecar_file.display())?;
    Ok(())
}

fn gen(args: GenArgs) -> Result<(), CliError> {
    if args.n == 0 || args.d == 0 {
        return Err(CliError::usage("gen needs --n >= 1 and --d >= 1"));
    }
    let ds = DataSet::generate_synthetic(args.n, args.d, args.seed);
    let mut buf = Vec::new();
    ds.write_libsvm(&mut buf)?;
    fs::write(&args.out, buf)?;
    Ok(())
}

fn plot(args: PlotArgs) -> Result<(), CliError> {
    if !args.names.is_empty() && args.names.len() != args.traces.len() {
        return Err(CliError::usage("--names must match the number of traces"));
    }
    let mut traces = Vec::new();
    for (idx, path) in args.traces.iter().enumerate() {
        let file = fs::File::open(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let trace = ConvergenceTrace::read_csv(BufReader::new(file))?;
        let name = args
            .names
            .get(idx)
            .cloned()
            .unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("trace {idx}"))
            });
        traces.push((name, trace));
    }
    let svg = render_svg(&traces)?;
    fs::write(&args.out, svg)?;
    Ok(())
}
