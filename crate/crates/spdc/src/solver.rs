//! The stochastic primal-dual coordinate solvers.
//!
//! One `step` implementation covers all three variants: the basic solver is
//! the mini-batch solver with `m = 1`, and weighted sampling only changes
//! the index distribution, the dual prox weight (`p_k n / sigma`) and the
//! primal gradient scaling (`1 / (p_k n)`).
//!
//! The primal vector is stored as a per-coordinate pair
//! `(x_j at t_mat[j], x_j one iteration earlier)`. In dense mode every
//! coordinate advances every iteration so `t_mat[j] == t` throughout; in
//! sparse (lazy) mode untouched coordinates are left behind and caught up
//! in O(1) with the regularizer closed forms when a sampled row touches
//! them, which makes the per-iteration cost proportional to the number of
//! non-zeros. Both modes draw the identical random sequence, so a lazy run
//! is a floating-point-level replay of the dense one.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{DataSet, SparseRow};
use crate::loss::{LossError, LossModel};
use crate::objective::{
    dual_aggregate, eval_dual_with_aggregate, eval_primal, squared_distance,
};
use crate::regularizer::Regularizer;
use crate::sampling::{sample_subset, SamplingPlan};
use crate::trace::{ConvergenceTrace, TraceOptions, TraceRecord};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("mini-batch size {m} out of range 1..={n}")]
    BadBatchSize { m: usize, n: usize },
    #[error("the {0} variant uses m = 1")]
    SingleSampleVariant(&'static str),
    #[error("loss is not smooth (gamma = 0); solve it through a perturbation delta > 0")]
    NonSmoothLoss,
    #[error("regularizer is not strongly convex (lambda2 = 0); solve it through a perturbation delta > 0")]
    NotStronglyConvex,
    #[error("parameter {name} out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("initial {name} has length {got}, expected {expected}")]
    BadInit {
        name: &'static str,
        got: usize,
        expected: usize,
    },
}

/// Which sampling/update rule the solver runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Basic,
    MiniBatch,
    Weighted,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::MiniBatch => "minibatch",
            Variant::Weighted => "weighted",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(Variant::Basic),
            "minibatch" | "mini-batch" => Ok(Variant::MiniBatch),
            "weighted" => Ok(Variant::Weighted),
            other => Err(format!("unknown solver variant `{other}`")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Step and extrapolation parameters `(tau, sigma, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
}

fn require_positive(name: &'static str, value: f64) -> Result<(), SolverError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SolverError::BadParameter { name, value })
    }
}

/// Uniform-sampling parameters:
/// `tau = (1/R) sqrt(m gamma / (n lambda))`,
/// `sigma = (1/R) sqrt(n lambda / (m gamma))`,
/// `theta = 1 - (n/m + R sqrt(n / (m lambda gamma)))^-1`.
pub fn compute_parameters(
    n: usize,
    m: usize,
    r: f64,
    lambda: f64,
    gamma: f64,
) -> Result<StepParams, SolverError> {
    require_positive("n", n as f64)?;
    require_positive("m", m as f64)?;
    if m > n {
        return Err(SolverError::BadBatchSize { m, n });
    }
    require_positive("R", r)?;
    require_positive("lambda", lambda)?;
    require_positive("gamma", gamma)?;
    let (nf, mf) = (n as f64, m as f64);
    let tau = (mf * gamma / (nf * lambda)).sqrt() / r;
    let sigma = (nf * lambda / (mf * gamma)).sqrt() / r;
    let theta = 1.0 - 1.0 / (nf / mf + r * (nf / (mf * lambda * gamma)).sqrt());
    Ok(StepParams { tau, sigma, theta })
}

/// Weighted-sampling parameters:
/// `tau = (alpha / (2 Rbar)) sqrt(gamma / (n lambda))`,
/// `sigma = (alpha / (2 Rbar)) sqrt(n lambda / gamma)`,
/// `theta = 1 - (n/(1-alpha) + (Rbar/alpha) sqrt(n/(lambda gamma)))^-1`.
pub fn compute_weighted_parameters(
    n: usize,
    rbar: f64,
    lambda: f64,
    gamma: f64,
    alpha: f64,
) -> Result<StepParams, SolverError> {
    require_positive("n", n as f64)?;
    require_positive("Rbar", rbar)?;
    require_positive("lambda", lambda)?;
    require_positive("gamma", gamma)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SolverError::BadAlpha(alpha));
    }
    let nf = n as f64;
    let tau = alpha / (2.0 * rbar) * (gamma / (nf * lambda)).sqrt();
    let sigma = alpha / (2.0 * rbar) * (nf * lambda / gamma).sqrt();
    let theta = 1.0 - 1.0 / (nf / (1.0 - alpha) + rbar / alpha * (nf / (lambda * gamma)).sqrt());
    Ok(StepParams { tau, sigma, theta })
}

/// The convergence-factor-minimizing sampling mix
/// `alpha* = 1 / (1 + (n/kappa_bar)^(1/4))`.
pub fn optimal_alpha(n: usize, kappa_bar: f64) -> f64 {
    1.0 / (1.0 + (n as f64 / kappa_bar).powf(0.25))
}

/// Strongly convex perturbation: adds `delta y^2/2` to each conjugate
/// (raising `gamma` by `delta`) and `(delta/2)||x||^2` to the regularizer
/// (raising `lambda2` by `delta`).
pub fn perturb(loss: &LossModel, reg: &Regularizer, delta: f64) -> (LossModel, Regularizer) {
    assert!(delta > 0.0 && delta.is_finite());
    (loss.perturbed(delta), reg.perturbed(delta))
}

/// Plain-data solver configuration. `params` and `alpha` default to the
/// closed-form choices when left unset.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub variant: Variant,
    pub m: usize,
    pub params: Option<StepParams>,
    pub alpha: Option<f64>,
    pub delta: f64,
    pub passes: f64,
    pub seed: u64,
    /// Lazy (delayed) primal updates; identical results, sparse-data cost.
    pub sparse: bool,
}

impl SolverConfig {
    pub fn basic(passes: f64, seed: u64) -> Self {
        SolverConfig {
            variant: Variant::Basic,
            m: 1,
            params: None,
            alpha: None,
            delta: 0.0,
            passes,
            seed,
            sparse: false,
        }
    }

    pub fn minibatch(m: usize, passes: f64, seed: u64) -> Self {
        SolverConfig {
            variant: Variant::MiniBatch,
            m,
            ..Self::basic(passes, seed)
        }
    }

    pub fn weighted(passes: f64, seed: u64) -> Self {
        SolverConfig {
            variant: Variant::Weighted,
            ..Self::basic(passes, seed)
        }
    }

    pub fn with_sparse(mut self, sparse: bool) -> Self {
        self.sparse = sparse;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_params(mut self, params: StepParams) -> Self {
        self.params = Some(params);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }
}

/// A configured solver bound to a data set. Construction resolves the
/// perturbation, validates labels and strong convexity, computes the step
/// parameters, and builds the sampling plan; `run` and `step` then do no
/// further checking.
pub struct Solver<'a> {
    ds: &'a DataSet,
    /// Objective used for trace evaluation (the unperturbed problem).
    loss_orig: LossModel,
    reg_orig: Regularizer,
    /// Problem the iterations actually solve (perturbed when delta > 0).
    loss: LossModel,
    reg: Regularizer,
    variant: Variant,
    m: usize,
    params: StepParams,
    alpha: Option<f64>,
    plan: Option<SamplingPlan>,
    passes: f64,
    seed: u64,
    sparse: bool,
}

impl<'a> Solver<'a> {
    pub fn new(
        ds: &'a DataSet,
        loss: LossModel,
        reg: Regularizer,
        cfg: &SolverConfig,
    ) -> Result<Self, SolverError> {
        let n = ds.n();
        if cfg.m < 1 || cfg.m > n {
            return Err(SolverError::BadBatchSize { m: cfg.m, n });
        }
        if cfg.m != 1 && cfg.variant != Variant::MiniBatch {
            return Err(SolverError::SingleSampleVariant(cfg.variant.as_str()));
        }
        if !(cfg.passes >= 0.0 && cfg.passes.is_finite()) {
            return Err(SolverError::BadParameter {
                name: "passes",
                value: cfg.passes,
            });
        }
        if !(cfg.delta >= 0.0 && cfg.delta.is_finite()) {
            return Err(SolverError::BadParameter {
                name: "delta",
                value: cfg.delta,
            });
        }
        for i in 0..n {
            loss.validate_label(ds.label(i))?;
        }
        let (loss_eff, reg_eff) = if cfg.delta > 0.0 {
            perturb(&loss, &reg, cfg.delta)
        } else {
            (loss, reg)
        };
        let gamma = loss_eff.gamma();
        if gamma <= 0.0 {
            return Err(SolverError::NonSmoothLoss);
        }
        let lambda = reg_eff.strong_convexity();
        if lambda <= 0.0 {
            return Err(SolverError::NotStronglyConvex);
        }
        require_positive("R", ds.max_norm())?;

        let (alpha, plan) = if cfg.variant == Variant::Weighted {
            let alpha = cfg.alpha.unwrap_or_else(|| {
                let kappa_bar = ds.mean_norm() * ds.mean_norm() / (lambda * gamma);
                optimal_alpha(n, kappa_bar)
            });
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(SolverError::BadAlpha(alpha));
            }
            (Some(alpha), Some(SamplingPlan::weighted(ds, alpha)))
        } else {
            (None, None)
        };

        let params = match cfg.params {
            Some(p) => {
                require_positive("tau", p.tau)?;
                require_positive("sigma", p.sigma)?;
                if !(p.theta > 0.0 && p.theta < 1.0) {
                    return Err(SolverError::BadParameter {
                        name: "theta",
                        value: p.theta,
                    });
                }
                p
            }
            None => match cfg.variant {
                Variant::Weighted => compute_weighted_parameters(
                    n,
                    ds.mean_norm(),
                    lambda,
                    gamma,
                    alpha.expect("weighted alpha resolved above"),
                )?,
                _ => compute_parameters(n, cfg.m, ds.max_norm(), lambda, gamma)?,
            },
        };

        Ok(Solver {
            ds,
            loss_orig: loss,
            reg_orig: reg,
            loss: loss_eff,
            reg: reg_eff,
            variant: cfg.variant,
            m: cfg.m,
            params,
            alpha,
            plan,
            passes: cfg.passes,
            seed: cfg.seed,
            sparse: cfg.sparse,
        })
    }

    pub fn params(&self) -> StepParams {
        self.params
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn plan(&self) -> Option<&SamplingPlan> {
        self.plan.as_ref()
    }

    /// The loss/regularizer pair the iterations solve (perturbed form).
    pub fn effective_problem(&self) -> (LossModel, Regularizer) {
        (self.loss, self.reg)
    }

    pub fn dataset(&self) -> &DataSet {
        self.ds
    }

    /// Total iterations for the configured pass budget.
    pub fn total_iterations(&self) -> u64 {
        (self.passes * self.ds.n() as f64 / self.m as f64).ceil() as u64
    }

    /// Default initialization: `x = 0`, `y_i` the projection of 0 onto the
    /// conjugate domain, `u` the exact aggregate of `y`.
    pub fn init_state(&self) -> SolverState {
        let d = self.ds.dim();
        let n = self.ds.n();
        let y: Vec<f64> = (0..n)
            .map(|i| self.loss.clamp_to_domain(0.0, self.ds.label(i)))
            .collect();
        self.state_from(vec![0.0; d], y)
    }

    /// Start from explicit points; `y0` is clipped into the conjugate
    /// domain and `x^(-1) := x^(0)` so the first extrapolate equals `x0`.
    pub fn init_state_at(&self, x0: &[f64], y0: &[f64]) -> Result<SolverState, SolverError> {
        if x0.len() != self.ds.dim() {
            return Err(SolverError::BadInit {
                name: "x0",
                got: x0.len(),
                expected: self.ds.dim(),
            });
        }
        if y0.len() != self.ds.n() {
            return Err(SolverError::BadInit {
                name: "y0",
                got: y0.len(),
                expected: self.ds.n(),
            });
        }
        let y: Vec<f64> = y0
            .iter()
            .enumerate()
            .map(|(i, &v)| self.loss.clamp_to_domain(v, self.ds.label(i)))
            .collect();
        Ok(self.state_from(x0.to_vec(), y))
    }

    fn state_from(&self, x: Vec<f64>, y: Vec<f64>) -> SolverState {
        let d = self.ds.dim();
        let u = dual_aggregate(self.ds, &y);
        SolverState {
            x_prev: x.clone(),
            x,
            t_mat: vec![0; d],
            y,
            u,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            batch: Vec::with_capacity(self.m),
            touched: Vec::new(),
            sums: vec![0.0; d],
            xbar: vec![0.0; d],
        }
    }

    /// One iteration: sample, dual prox on the shared extrapolate, then the
    /// coordinate-wise primal prox with the variant's gradient scaling.
    pub fn step(&self, st: &mut SolverState) -> Result<(), SolverError> {
        let n = self.ds.n();
        let StepParams { tau, sigma, theta } = self.params;

        st.batch.clear();
        match self.variant {
            Variant::Weighted => {
                let plan = self.plan.as_ref().expect("weighted solver has a plan");
                st.batch.push(plan.draw(&mut st.rng));
            }
            _ => sample_subset(&mut st.rng, n, self.m, &mut st.batch),
        }

        // Union of the sampled supports, ascending.
        st.touched.clear();
        if st.batch.len() == 1 {
            st.touched
                .extend_from_slice(self.ds.row(st.batch[0]).indices());
        } else {
            for &k in &st.batch {
                st.touched.extend_from_slice(self.ds.row(k).indices());
            }
            st.touched.sort_unstable();
            st.touched.dedup();
        }

        // Materialize x and xbar at iteration t on the touched coordinates.
        let t = st.t;
        for &j in &st.touched {
            let j = j as usize;
            let (xt, xtm1) = if self.sparse {
                let gap = t - st.t_mat[j];
                let pair = self.reg.catch_up_pair(st.x[j], st.x_prev[j], st.u[j], tau, gap);
                st.x[j] = pair.0;
                st.x_prev[j] = pair.1;
                st.t_mat[j] = t;
                pair
            } else {
                (st.x[j], st.x_prev[j])
            };
            st.xbar[j] = xt + theta * (xt - xtm1);
        }

        // Dual coordinate maximizations, all against the same xbar,
        // reduced in ascending index order.
        let inv_sigma = 1.0 / sigma;
        let mut grad_scale = 1.0 / self.m as f64;
        for &k in &st.batch {
            let row = self.ds.row(k);
            let inner = dot_sparse(row, &st.xbar);
            let w = match self.variant {
                Variant::Weighted => {
                    let p = self.plan.as_ref().expect("plan").probability(k);
                    grad_scale = 1.0 / (p * n as f64);
                    p * n as f64 * inv_sigma
                }
                _ => inv_sigma,
            };
            let y_new = self.loss.dual_prox(self.ds.label(k), inner, st.y[k], w)?;
            let dy = y_new - st.y[k];
            st.y[k] = y_new;
            if dy != 0.0 {
                for (j, v) in row.iter() {
                    st.sums[j] += dy * v;
                }
            }
        }

        // Primal prox; in sparse mode only the touched coordinates advance.
        let inv_n = 1.0 / n as f64;
        if self.sparse {
            for &j in &st.touched {
                let j = j as usize;
                let grad = st.u[j] + grad_scale * st.sums[j];
                let xn = self.reg.prox_coord(st.x[j], grad, tau);
                st.x_prev[j] = st.x[j];
                st.x[j] = xn;
                st.t_mat[j] = t + 1;
                st.u[j] += st.sums[j] * inv_n;
                st.sums[j] = 0.0;
            }
        } else {
            for j in 0..self.ds.dim() {
                let grad = st.u[j] + grad_scale * st.sums[j];
                let xn = self.reg.prox_coord(st.x[j], grad, tau);
                st.x_prev[j] = st.x[j];
                st.x[j] = xn;
            }
            for &j in &st.touched {
                let j = j as usize;
                st.u[j] += st.sums[j] * inv_n;
                st.sums[j] = 0.0;
            }
        }
        st.t = t + 1;
        Ok(())
    }

    /// Writes `x^(t)` (all coordinates caught up, state untouched) into `buf`.
    pub fn materialize_x(&self, st: &SolverState, buf: &mut Vec<f64>) {
        buf.clear();
        buf.reserve(self.ds.dim());
        if !self.sparse {
            buf.extend_from_slice(&st.x);
            return;
        }
        let tau = self.params.tau;
        for j in 0..self.ds.dim() {
            let gap = st.t - st.t_mat[j];
            buf.push(self.reg.catch_up(st.x[j], st.u[j], tau, gap));
        }
    }

    /// Runs the configured number of passes, invoking `hook` on the initial
    /// point, at every pass boundary, and on the final iterate.
    pub fn run_state<F>(&self, st: &mut SolverState, mut hook: F) -> Result<(), SolverError>
    where
        F: FnMut(Snapshot<'_>),
    {
        let n = self.ds.n() as u64;
        let m = self.m as u64;
        let total = self.total_iterations();
        let mut xbuf = Vec::new();
        let emit =
            |solver: &Self, st: &SolverState, xbuf: &mut Vec<f64>, hook: &mut F| {
                solver.materialize_x(st, xbuf);
                hook(Snapshot {
                    t: st.t,
                    pass: (st.t * m) as f64 / n as f64,
                    x: xbuf,
                    y: &st.y,
                    u: &st.u,
                });
            };
        emit(self, st, &mut xbuf, &mut hook);
        for t in 0..total {
            self.step(st)?;
            let crossed = ((t + 1) * m) / n > (t * m) / n;
            if crossed || t + 1 == total {
                emit(self, st, &mut xbuf, &mut hook);
            }
        }
        Ok(())
    }

    /// Runs and collects a [`ConvergenceTrace`] plus the final iterates.
    pub fn run_traced(&self, opts: &TraceOptions<'_>) -> Result<SolveOutcome, SolverError> {
        let (loss_t, reg_t) = if opts.perturbed_objective {
            (self.loss, self.reg)
        } else {
            (self.loss_orig, self.reg_orig)
        };
        let cadence = opts.effective_cadence();
        let start = Instant::now();
        let mut trace = ConvergenceTrace::default();
        let mut st = self.init_state();
        let mut boundary_index = 0u64;
        let mut last_pass = f64::NEG_INFINITY;
        self.run_state(&mut st, |snap| {
            let is_final = snap.t >= self.total_iterations();
            let due = boundary_index % cadence == 0;
            boundary_index += 1;
            if (!due && !is_final) || snap.pass <= last_pass && snap.t > 0 {
                return;
            }
            last_pass = snap.pass;
            let u_exact = dual_aggregate(self.ds, snap.y);
            debug_assert!(
                snap.u
                    .iter()
                    .zip(&u_exact)
                    .all(|(&a, &b)| (a - b).abs() <= 1e-9),
                "maintained u drifted from (1/n) sum y_i a_i"
            );
            let primal = eval_primal(self.ds, &loss_t, &reg_t, snap.x);
            let dual = eval_dual_with_aggregate(self.ds, &loss_t, &reg_t, snap.y, &u_exact);
            trace.push(TraceRecord {
                pass: snap.pass,
                primal,
                dual,
                gap: primal - dual,
                dist_x: opts.reference.map(|(rx, _)| squared_distance(snap.x, rx)),
                dist_y: opts.reference.map(|(_, ry)| squared_distance(snap.y, ry)),
                wall_ms: opts
                    .wall_clock
                    .then(|| start.elapsed().as_secs_f64() * 1e3),
            });
        })?;
        let mut x = Vec::new();
        self.materialize_x(&st, &mut x);
        Ok(SolveOutcome {
            x,
            y: st.y,
            u: st.u,
            trace,
        })
    }

    pub fn run(&self) -> Result<SolveOutcome, SolverError> {
        self.run_traced(&TraceOptions::default())
    }
}

/// Mutable per-run state; owns the RNG stream (one stream per run, derived
/// from the seed) and the lazy bookkeeping.
pub struct SolverState {
    /// `x_j` at iteration `t_mat[j]`.
    x: Vec<f64>,
    /// `x_j` at iteration `t_mat[j] - 1` (equal to `x` at t = 0).
    x_prev: Vec<f64>,
    /// Last iteration at which the coordinate was materialized.
    t_mat: Vec<u64>,
    y: Vec<f64>,
    /// Maintained aggregate `(1/n) sum_i y_i a_i`.
    u: Vec<f64>,
    t: u64,
    rng: ChaCha8Rng,
    batch: Vec<usize>,
    touched: Vec<u32>,
    sums: Vec<f64>,
    xbar: Vec<f64>,
}

impl SolverState {
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Raw (possibly stale in sparse mode) primal storage.
    pub fn x_raw(&self) -> &[f64] {
        &self.x
    }
}

/// Read-only view of the iterate at a pass boundary; `x` is fully
/// materialized.
pub struct Snapshot<'a> {
    pub t: u64,
    pub pass: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub u: &'a [f64],
}

/// Final iterates and the recorded trace of one run.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub trace: ConvergenceTrace,
}

/// Inner product of a sparse row with a dense vector; rows longer than 10^4
/// non-zeros accumulate with compensation so the lazy/dense agreement
/// tolerance stays reachable on very long rows.
fn dot_sparse(row: &SparseRow, x: &[f64]) -> f64 {
    if row.nnz() <= 10_000 {
        return row.iter().map(|(j, v)| v * x[j]).sum();
    }
    let mut acc = crate::objective::KahanSum::default();
    for (j, v) in row.iter() {
        acc.add(v * x[j]);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;

    fn ridge_loss() -> LossModel {
        LossModel::new(LossKind::Squared)
    }

    #[test]
    fn parameter_formulas_match_hand_evaluation() {
        let p = compute_parameters(100, 1, 1.0, 0.01, 1.0).unwrap();
        assert!((p.tau - 1.0).abs() < 1e-15);
        assert!((p.sigma - 1.0).abs() < 1e-15);
        assert!((p.theta - 0.995).abs() < 1e-15);

        // m = n reduces to the batch step sizes tau = (1/R) sqrt(gamma/lambda).
        let p = compute_parameters(64, 64, 2.0, 0.25, 1.0).unwrap();
        assert!((p.tau - 0.5 * 2.0).abs() < 1e-15);
        assert!((p.sigma - 0.5 * 0.5).abs() < 1e-15);

        // theta depends only on n/m and R^2/(lambda gamma): scale-invariance.
        let a = compute_parameters(50, 5, 1.0, 0.02, 1.0).unwrap();
        let c = 3.0;
        let b = compute_parameters(50, 5, c, 0.02 * c, c).unwrap();
        assert!((a.theta - b.theta).abs() < 1e-12);

        // The perturbed setting gamma = lambda = delta gives
        // tau = (1/R) sqrt(m/n).
        let d = 1e-3;
        let p = compute_parameters(100, 4, 2.0, d, d).unwrap();
        assert!((p.tau - 0.5 * (4.0f64 / 100.0).sqrt()).abs() < 1e-15);

        assert!(compute_parameters(10, 0, 1.0, 1.0, 1.0).is_err());
        assert!(compute_parameters(10, 11, 1.0, 1.0, 1.0).is_err());
        assert!(compute_parameters(10, 1, 0.0, 1.0, 1.0).is_err());
        assert!(compute_parameters(10, 1, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn weighted_parameters_match_hand_evaluation() {
        let p = compute_weighted_parameters(100, 1.0, 0.01, 1.0, 0.5).unwrap();
        assert!((p.tau - 0.25).abs() < 1e-15);
        assert!((p.sigma - 0.25).abs() < 1e-15);
        assert!((p.theta - (1.0 - 1.0 / 400.0)).abs() < 1e-15);
        assert!(compute_weighted_parameters(100, 1.0, 0.01, 1.0, 1.0).is_err());
    }

    #[test]
    fn optimal_alpha_matches_the_formula_and_minimizes_theta() {
        assert_eq!(optimal_alpha(100, 100.0), 0.5);
        assert!((optimal_alpha(16, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!(optimal_alpha(1_000_000, 1e-3) < 0.04);

        // Grid search over alpha confirms the minimizer of theta.
        let (n, rbar, lambda, gamma) = (200usize, 1.3, 5e-3, 1.0);
        let kappa_bar = rbar * rbar / (lambda * gamma);
        let star = optimal_alpha(n, kappa_bar);
        let theta_at = |a: f64| {
            compute_weighted_parameters(n, rbar, lambda, gamma, a)
                .unwrap()
                .theta
        };
        let best = theta_at(star);
        for k in 1..100 {
            let a = k as f64 / 100.0;
            assert!(best <= theta_at(a) + 1e-12, "alpha={a}");
        }
    }

    #[test]
    fn theta_is_monotone_in_batch_ratio_and_condition_number() {
        let theta = |n: usize, m: usize, kappa: f64| {
            // R = sqrt(kappa), lambda = gamma = 1.
            compute_parameters(n, m, kappa.sqrt(), 1.0, 1.0).unwrap().theta
        };
        for &kappa in &[1.0, 10.0, 1e3] {
            assert!(theta(100, 1, kappa) > theta(100, 10, kappa));
            assert!(theta(100, 10, kappa) > theta(100, 100, kappa));
        }
        for &m in &[1usize, 10, 100] {
            assert!(theta(100, m, 1e4) > theta(100, m, 1e2));
            assert!(theta(100, m, 1e2) > theta(100, m, 1.0));
        }
    }

    #[test]
    fn single_sample_recursion_matches_the_affine_map() {
        // n = 1: the iteration is deterministic; compare five steps against
        // the hand-written affine recursion of the four update equations.
        let ds = DataSet::from_rows(
            vec![SparseRow::new(vec![0], vec![1.3])],
            vec![0.7],
            None,
        )
        .unwrap();
        let loss = ridge_loss();
        let reg = Regularizer::squared_l2(0.4).unwrap();
        let cfg = SolverConfig::basic(5.0, 1);
        let solver = Solver::new(&ds, loss, reg, &cfg).unwrap();
        let StepParams { tau, sigma, theta } = solver.params();

        let (a, b, lambda) = (1.3, 0.7, 0.4);
        let (mut x, mut xp, mut y, mut u) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut st = solver.init_state();
        for _ in 0..5 {
            solver.step(&mut st).unwrap();
            let xbar = x + theta * (x - xp);
            let inner = a * xbar;
            let y_new = (sigma * (inner - b) + y) / (sigma + 1.0);
            let x_new = (x - tau * (u + (y_new - y) * a)) / (1.0 + lambda * tau);
            u += (y_new - y) * a;
            xp = x;
            x = x_new;
            y = y_new;
            let mut got = Vec::new();
            solver.materialize_x(&st, &mut got);
            assert!((got[0] - x).abs() < 1e-14);
            assert!((st.y()[0] - y).abs() < 1e-14);
            assert!((st.u()[0] - u).abs() < 1e-14);
        }
    }

    #[test]
    fn minibatch_of_one_replays_the_basic_variant() {
        let ds = DataSet::generate_synthetic(20, 6, 5);
        let loss = ridge_loss();
        let reg = Regularizer::squared_l2(0.05).unwrap();
        let basic = Solver::new(&ds, loss, reg, &SolverConfig::basic(4.0, 77)).unwrap();
        let mb = Solver::new(&ds, loss, reg, &SolverConfig::minibatch(1, 4.0, 77)).unwrap();
        let a = basic.run().unwrap();
        let b = mb.run().unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn weighted_on_a_single_sample_matches_basic() {
        // With n = 1 both samplers always pick index 0 and p_0 = 1, so the
        // weighted step must coincide with the basic one.
        let ds = DataSet::from_rows(
            vec![SparseRow::new(vec![0, 1], vec![0.8, -0.6])],
            vec![1.0],
            None,
        )
        .unwrap();
        let loss = LossModel::new(LossKind::SmoothedHinge);
        let reg = Regularizer::squared_l2(0.2).unwrap();
        let basic = Solver::new(&ds, loss, reg, &SolverConfig::basic(6.0, 3)).unwrap();
        let params = basic.params();
        let weighted = Solver::new(
            &ds,
            loss,
            reg,
            &SolverConfig::weighted(6.0, 3)
                .with_alpha(0.5)
                .with_params(params),
        )
        .unwrap();
        let a = basic.run().unwrap();
        let b = weighted.run().unwrap();
        for (p, q) in a.x.iter().zip(&b.x) {
            assert!((p - q).abs() <= 1e-12);
        }
        for (p, q) in a.y.iter().zip(&b.y) {
            assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn first_step_leaves_unsampled_support_untouched() {
        // From the zero initialization, coordinates outside the sampled
        // row's support keep x_j = 0 and u_j = 0 after one step.
        let rows = vec![
            SparseRow::new(vec![0, 1], vec![1.0, 2.0]),
            SparseRow::new(vec![2, 3], vec![-1.0, 0.5]),
        ];
        let ds = DataSet::from_rows(rows, vec![1.0, -1.0], None).unwrap();
        let loss = LossModel::new(LossKind::SmoothedHinge);
        let reg = Regularizer::squared_l2(0.1).unwrap();
        let cfg = SolverConfig::basic(1.0, 0).with_sparse(true);
        let solver = Solver::new(&ds, loss, reg, &cfg).unwrap();
        let mut st = solver.init_state();
        solver.step(&mut st).unwrap();
        let picked = st.batch[0];
        let mut x = Vec::new();
        solver.materialize_x(&st, &mut x);
        for j in 0..4 {
            let on_support = ds.row(picked).indices().contains(&(j as u32));
            if !on_support {
                assert_eq!(x[j], 0.0);
                assert_eq!(st.u()[j], 0.0);
            }
        }
    }

    #[test]
    fn minibatch_dual_reduction_is_order_independent() {
        let ds = DataSet::generate_synthetic(12, 5, 8);
        let loss = ridge_loss();
        let reg = Regularizer::squared_l2(0.1).unwrap();
        let solver = Solver::new(&ds, loss, reg, &SolverConfig::minibatch(4, 1.0, 9)).unwrap();
        let before = solver.init_state();
        let mut st = solver.init_state();
        solver.step(&mut st).unwrap();
        // Recompute u from the dual increments in descending order.
        let mut u = before.u.clone();
        for &k in st.batch.iter().rev() {
            let dy = st.y[k] - before.y[k];
            for (j, v) in ds.row(k).iter() {
                u[j] += dy * v / ds.n() as f64;
            }
        }
        for (a, b) in u.iter().zip(st.u()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_traces() {
        let ds = DataSet::generate_synthetic(15, 4, 2);
        let loss = ridge_loss();
        let reg = Regularizer::squared_l2(0.2).unwrap();
        let cfg = SolverConfig::basic(3.0, 123);
        let run = || {
            Solver::new(&ds, loss, reg, &cfg)
                .unwrap()
                .run()
                .unwrap()
                .trace
                .to_csv_string()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_passes_returns_the_initial_point_and_one_record() {
        let ds = DataSet::generate_synthetic(5, 3, 2);
        let solver = Solver::new(
            &ds,
            ridge_loss(),
            Regularizer::squared_l2(0.5).unwrap(),
            &SolverConfig::basic(0.0, 1),
        )
        .unwrap();
        let out = solver.run().unwrap();
        assert_eq!(out.trace.len(), 1);
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ridge_objective_improves_over_ten_passes() {
        // P* from an exact normal-equations solve of the 5x5 system.
        let ds = DataSet::generate_synthetic(5, 5, 33);
        let lambda = 0.2;
        let reg = Regularizer::squared_l2(lambda).unwrap();
        let d = ds.dim();
        let nf = ds.n() as f64;
        let mut m = vec![vec![0.0f64; d + 1]; d];
        for i in 0..ds.n() {
            for (j1, v1) in ds.row(i).iter() {
                for (j2, v2) in ds.row(i).iter() {
                    m[j1][j2] += v1 * v2 / nf;
                }
                m[j1][d] += v1 * ds.label(i) / nf;
            }
        }
        for j in 0..d {
            m[j][j] += lambda;
        }
        for col in 0..d {
            let piv = (col..d)
                .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
                .unwrap();
            m.swap(col, piv);
            for row in col + 1..d {
                let f = m[row][col] / m[col][col];
                for k in col..=d {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
        let mut xs = vec![0.0; d];
        for col in (0..d).rev() {
            let mut s = m[col][d];
            for k in col + 1..d {
                s -= m[col][k] * xs[k];
            }
            xs[col] = s / m[col][col];
        }
        let p_star = crate::objective::eval_primal(&ds, &ridge_loss(), &reg, &xs);

        let solver = Solver::new(&ds, ridge_loss(), reg, &SolverConfig::basic(10.0, 6)).unwrap();
        let out = solver.run().unwrap();
        let p0 = out.trace.records()[0].primal;
        let pt = out.trace.last().unwrap().primal;
        assert!(pt - p_star < p0 - p_star, "{pt} vs {p0} (P* = {p_star})");
        assert!(pt - p_star >= -1e-12, "primal below the exact optimum");
    }

    #[test]
    fn lazy_materialization_tracks_the_dense_run_at_every_boundary() {
        let ds = {
            // Sparse rows so laziness actually defers work.
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(14);
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..50 {
                let mut idx: Vec<u32> = (0..100u32).filter(|_| rng.random_bool(0.06)).collect();
                if idx.is_empty() {
                    idx.push(rng.random_range(0..100));
                }
                let vals: Vec<f64> = idx.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                rows.push(SparseRow::new(idx, vals));
                labels.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            }
            DataSet::from_rows(rows, labels, Some(100)).unwrap()
        };
        let loss = crate::loss::LossModel::new(crate::loss::LossKind::SmoothedHinge);
        for reg in [
            Regularizer::squared_l2(0.05).unwrap(),
            Regularizer::elastic_net(0.01, 0.05).unwrap(),
        ] {
            let cfg = SolverConfig::basic(5.0, 21);
            let dense = Solver::new(&ds, loss, reg, &cfg).unwrap();
            let lazy = Solver::new(&ds, loss, reg, &cfg.clone().with_sparse(true)).unwrap();
            let mut dense_xs: Vec<Vec<f64>> = Vec::new();
            let mut st = dense.init_state();
            dense
                .run_state(&mut st, |snap| dense_xs.push(snap.x.to_vec()))
                .unwrap();
            let mut idx = 0;
            let mut st = lazy.init_state();
            lazy.run_state(&mut st, |snap| {
                let diff = snap
                    .x
                    .iter()
                    .zip(&dense_xs[idx])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(diff <= 1e-9, "boundary {idx}: lazy/dense diff {diff:.3e}");
                idx += 1;
            })
            .unwrap();
            assert_eq!(idx, dense_xs.len());
        }
    }

    #[test]
    fn setup_rejects_invalid_configurations() {
        let ds = DataSet::generate_synthetic(5, 3, 2);
        let l2 = Regularizer::squared_l2(0.1).unwrap();
        // Unperturbed hinge has gamma = 0.
        let hinge = LossModel::new(LossKind::Hinge);
        let labels_ok = DataSet::from_rows(
            ds.rows().to_vec(),
            vec![1.0, -1.0, 1.0, 1.0, -1.0],
            None,
        )
        .unwrap();
        assert!(matches!(
            Solver::new(&labels_ok, hinge, l2, &SolverConfig::basic(1.0, 0)),
            Err(SolverError::NonSmoothLoss)
        ));
        // A perturbation makes it admissible.
        assert!(Solver::new(
            &labels_ok,
            hinge,
            l2,
            &SolverConfig::basic(1.0, 0).with_delta(1e-3)
        )
        .is_ok());
        // Pure l1 is rejected without a perturbation.
        let l1 = Regularizer::elastic_net(0.5, 0.0).unwrap();
        assert!(matches!(
            Solver::new(&ds, ridge_loss(), l1, &SolverConfig::basic(1.0, 0)),
            Err(SolverError::NotStronglyConvex)
        ));
        // Classification losses validate labels at setup.
        let sh = LossModel::new(LossKind::SmoothedHinge);
        assert!(Solver::new(&ds, sh, l2, &SolverConfig::basic(1.0, 0)).is_err());
        // Batch size range.
        assert!(Solver::new(&ds, ridge_loss(), l2, &SolverConfig::minibatch(6, 1.0, 0)).is_err());
        assert!(Solver::new(&ds, ridge_loss(), l2, &SolverConfig::minibatch(0, 1.0, 0)).is_err());
    }
}
