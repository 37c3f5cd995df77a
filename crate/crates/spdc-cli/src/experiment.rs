//! The JSON experiment schema and the deterministic parallel runner.
//!
//! One experiment = one dataset, one loss/regularizer pair, a list of named
//! solver configurations, and a list of seeds. Every `(solver, seed)` pair
//! produces `<name>-seed<seed>.csv`; `aggregate.csv` holds per-solver
//! mean/median gaps per pass, and `experiment.json` carries the full spec
//! for provenance. Re-running the same spec yields byte-identical files
//! (wall-clock timing is opt-in precisely because it would break that).

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use spdc::baseline::{afg_run, sdca_run};
use spdc::dataset::DataSet;
use spdc::loss::{LossKind, LossModel};
use spdc::regularizer::Regularizer;
use spdc::solver::{Solver, SolverConfig, StepParams, Variant};
use spdc::trace::{ConvergenceTrace, TraceOptions};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic { n: usize, d: usize, seed: u64 },
    File {
        path: PathBuf,
        #[serde(default)]
        dim_override: Option<usize>,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<DataSet, CliError> {
        match self {
            DatasetSpec::Synthetic { n, d, seed } => {
                if *n == 0 || *d == 0 {
                    return Err(CliError::usage("synthetic dataset needs n, d >= 1"));
                }
                Ok(DataSet::generate_synthetic(*n, *d, *seed))
            }
            DatasetSpec::File { path, dim_override } => {
                let file = fs::File::open(path)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                Ok(DataSet::parse_libsvm(BufReader::new(file), *dim_override)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spdc,
    Sdca,
    Afg,
}

fn default_m() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSpec {
    /// Name used for trace files and plot legends.
    pub name: String,
    pub method: Method,
    /// SPDC variant; ignored by the baselines.
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default = "default_m")]
    pub m: usize,
    pub passes: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub sparse: bool,
    /// AFG step-size override (default 1/L with L = R^2/gamma + lambda).
    #[serde(default)]
    pub afg_step: Option<f64>,
}

impl SolverSpec {
    fn step_params(&self) -> Result<Option<StepParams>, CliError> {
        match (self.tau, self.sigma, self.theta) {
            (None, None, None) => Ok(None),
            (Some(tau), Some(sigma), Some(theta)) => Ok(Some(StepParams { tau, sigma, theta })),
            _ => Err(CliError::usage(
                "tau, sigma, theta must be overridden together",
            )),
        }
    }

    fn spdc_config(&self, seed: u64) -> Result<SolverConfig, CliError> {
        let variant: Variant = self
            .variant
            .as_deref()
            .unwrap_or("basic")
            .parse()
            .map_err(CliError::Usage)?;
        let mut cfg = match variant {
            Variant::Basic => SolverConfig::basic(self.passes, seed),
            Variant::MiniBatch => SolverConfig::minibatch(self.m, self.passes, seed),
            Variant::Weighted => SolverConfig::weighted(self.passes, seed),
        };
        cfg.delta = self.delta;
        cfg.alpha = self.alpha;
        cfg.params = self.step_params()?;
        cfg.sparse = self.sparse;
        Ok(cfg)
    }
}

fn default_cadence() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    pub loss: String,
    #[serde(default)]
    pub lambda1: f64,
    pub lambda2: f64,
    pub solvers: Vec<SolverSpec>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    #[serde(default)]
    pub wall_clock: bool,
    #[serde(default)]
    pub perturbed_objective: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.solvers.is_empty() {
            return Err(CliError::usage("experiment needs at least one solver"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::usage("experiment needs at least one seed"));
        }
        if self.cadence == 0 {
            return Err(CliError::usage("cadence must be >= 1"));
        }
        let mut names: Vec<&str> = self.solvers.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.solvers.len() {
            return Err(CliError::usage("solver names must be unique"));
        }
        Ok(())
    }

    pub fn loss_model(&self) -> Result<LossModel, CliError> {
        let kind: LossKind = self.loss.parse()?;
        Ok(LossModel::new(kind))
    }

    pub fn regularizer(&self) -> Result<Regularizer, CliError> {
        Ok(Regularizer::elastic_net(self.lambda1, self.lambda2)?)
    }
}

/// Runs one `(solver spec, seed)` job on a shared dataset.
pub fn run_job(
    ds: &DataSet,
    loss: LossModel,
    reg: Regularizer,
    solver: &SolverSpec,
    seed: u64,
    opts: &TraceOptions<'_>,
) -> Result<ConvergenceTrace, CliError> {
    match solver.method {
        Method::Spdc => {
            let cfg = solver.spdc_config(seed)?;
            let out = Solver::new(ds, loss, reg, &cfg)?.run_traced(opts)?;
            Ok(out.trace)
        }
        Method::Sdca => {
            if solver.delta != 0.0 {
                return Err(CliError::usage("delta applies to the spdc method only"));
            }
            Ok(sdca_run(ds, loss, reg, solver.passes, seed, opts)?.trace)
        }
        Method::Afg => {
            if solver.delta != 0.0 {
                return Err(CliError::usage("delta applies to the spdc method only"));
            }
            Ok(afg_run(ds, loss, reg, solver.passes, solver.afg_step, opts)?.trace)
        }
    }
}

/// Files produced by [`run_experiment`], in spec order.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub trace_files: Vec<PathBuf>,
    pub aggregate_file: PathBuf,
    pub sidecar_file: PathBuf,
}

pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<ExperimentOutput, CliError> {
    spec.validate()?;
    let ds = spec.dataset.load()?;
    let loss = spec.loss_model()?;
    let reg = spec.regularizer()?;
    fs::create_dir_all(out_dir)?;

    let opts = TraceOptions {
        cadence: spec.cadence,
        reference: None,
        wall_clock: spec.wall_clock,
        perturbed_objective: spec.perturbed_objective,
    };

    let jobs: Vec<(usize, u64)> = (0..spec.solvers.len())
        .flat_map(|s| spec.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let traces: Vec<((usize, u64), ConvergenceTrace)> = jobs
        .par_iter()
        .map(|&(s, seed)| {
            run_job(&ds, loss, reg, &spec.solvers[s], seed, &opts).map(|t| ((s, seed), t))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| match e {
            CliError::Usage(m) => {
                CliError::Usage(format!("solver setup failed: {m}"))
            }
            other => other,
        })?;

    // Deterministic writes in spec order.
    let mut trace_files = Vec::new();
    for (idx, &(s, seed)) in jobs.iter().enumerate() {
        let name = sanitize(&spec.solvers[s].name);
        let path = out_dir.join(format!("{name}-seed{seed}.csv"));
        let mut buf = Vec::new();
        traces[idx].1.write_csv(&mut buf)?;
        fs::write(&path, buf)?;
        trace_files.push(path);
    }

    let aggregate_file = out_dir.join("aggregate.csv");
    fs::write(&aggregate_file, aggregate_csv(spec, &jobs, &traces))?;

    let sidecar_file = out_dir.join("experiment.json");
    let mut json = serde_json::to_string_pretty(spec)?;
    json.push('\n');
    fs::write(&sidecar_file, json)?;

    Ok(ExperimentOutput {
        trace_files,
        aggregate_file,
        sidecar_file,
    })
}

/// Per-solver mean and median gap at each recorded pass, recomputable from
/// the raw trace files.
fn aggregate_csv(
    spec: &ExperimentSpec,
    jobs: &[(usize, u64)],
    traces: &[((usize, u64), ConvergenceTrace)],
) -> String {
    let mut out = String::from("solver,pass,mean_gap,median_gap\n");
    for s in 0..spec.solvers.len() {
        let solver_traces: Vec<&ConvergenceTrace> = jobs
            .iter()
            .enumerate()
            .filter(|(_, &(si, _))| si == s)
            .map(|(idx, _)| &traces[idx].1)
            .collect();
        let records = solver_traces[0].len();
        for r in 0..records {
            if solver_traces.iter().any(|t| t.len() <= r) {
                break;
            }
            let pass = solver_traces[0].records()[r].pass;
            let mut gaps: Vec<f64> = solver_traces
                .iter()
                .map(|t| t.records()[r].gap)
                .collect();
            gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let median = if gaps.len() % 2 == 1 {
                gaps[gaps.len() / 2]
            } else {
                0.5 * (gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2])
            };
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                spec.solvers[s].name, pass, mean, median
            ));
        }
    }
    out
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect()
}
