//! Experiment harness for the `spdc` solvers: a JSON experiment schema, a
//! parallel runner that emits deterministic CSV traces plus an aggregate
//! file, and an SVG renderer for log-gap convergence plots.

pub mod error;
pub mod experiment;
pub mod plot;

pub use error::CliError;
pub use experiment::{run_experiment, DatasetSpec, ExperimentSpec, Method, SolverSpec};
pub use plot::render_svg;
