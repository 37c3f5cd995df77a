//! Stochastic primal-dual coordinate (SPDC) solvers for regularized
//! empirical risk minimization of linear predictors, with mini-batch and
//! weighted-sampling variants, lazy sparse updates, strongly convex
//! perturbation for non-smooth problems, and SDCA / accelerated
//! proximal-gradient baselines.
//!
//! The problem solved is
//!
//! ```text
//! minimize_x  P(x) = (1/n) sum_i phi_i(<a_i, x>) + g(x)
//! ```
//!
//! through its convex-concave saddle-point reformulation; the solver
//! alternates a randomized dual coordinate proximal ascent step with a
//! primal proximal descent step on an extrapolated point.
//!
//! ```
//! use spdc::{DataSet, LossKind, LossModel, Regularizer, Solver, SolverConfig};
//!
//! let ds = DataSet::generate_synthetic(50, 8, 1);
//! let loss = LossModel::new(LossKind::Squared);
//! let reg = Regularizer::squared_l2(1e-2).unwrap();
//! let solver = Solver::new(&ds, loss, reg, &SolverConfig::basic(20.0, 7)).unwrap();
//! let out = solver.run().unwrap();
//! let trace = out.trace.records();
//! assert!(trace.last().unwrap().gap < 1e-3 * trace[0].gap);
//! ```

// Index loops over parallel sample/coordinate arrays read better here than
// zipped iterator chains.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod baseline;
pub mod dataset;
pub mod loss;
pub mod objective;
pub mod regularizer;
pub mod sampling;
pub mod solver;
pub mod trace;

pub use baseline::{afg_run, reference_solution, sdca_run, BaselineError, Reference};
pub use dataset::{DataError, DataSet, SparseRow};
pub use loss::{LossError, LossKind, LossModel};
pub use objective::{condition_number, dual_aggregate, eval_dual, eval_primal, saddle_value};
pub use regularizer::{catchup_elastic, catchup_l2, RegError, Regularizer};
pub use sampling::SamplingPlan;
pub use solver::{
    compute_parameters, compute_weighted_parameters, optimal_alpha, perturb, SolveOutcome, Solver,
    SolverConfig, SolverError, StepParams, Variant,
};
pub use trace::{ConvergenceTrace, TraceOptions, TraceRecord};
