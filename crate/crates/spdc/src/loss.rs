//! Per-sample losses: values, convex conjugates, smoothness constants, and
//! the dual coordinate proximal step shared by all solver variants.
//!
//! A [`LossModel`] is a loss kind plus an optional strongly convex
//! perturbation `delta` added to the conjugate (`phi* + delta y^2 / 2`),
//! which is the smoothing device that makes the non-smooth hinge admissible.
//! Models are stateless and cheap to copy; every operation is re-entrant.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Iteration cap for the safeguarded Newton solve in the logistic prox.
const NEWTON_MAX_ITERS: usize = 200;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("unknown loss kind `{0}`")]
    UnknownKind(String),
    #[error("label {0} invalid for classification loss (must be -1 or +1)")]
    InvalidLabel(f64),
    #[error("dual prox Newton did not converge after {iters} iterations (inner={inner}, w={w})")]
    ProxNoConvergence { iters: usize, inner: f64, w: f64 },
}

/// Supported per-sample loss families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `phi(z) = (z - b)^2 / 2`, regression.
    Squared,
    /// Piecewise-quadratic hinge smoothing, classification.
    SmoothedHinge,
    /// `phi(z) = log(1 + exp(-bz))`, classification.
    Logistic,
    /// `phi(z) = max(0, 1 - bz)`; non-smooth, requires a perturbation.
    Hinge,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::SmoothedHinge => "smoothed-hinge",
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
        }
    }

    fn is_classification(&self) -> bool {
        !matches!(self, LossKind::Squared)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "smoothed-hinge" | "smoothed_hinge" => Ok(LossKind::SmoothedHinge),
            "logistic" => Ok(LossKind::Logistic),
            "hinge" => Ok(LossKind::Hinge),
            other => Err(LossError::UnknownKind(other.to_string())),
        }
    }
}

/// A loss kind together with the conjugate-side perturbation `delta >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    delta: f64,
}

impl LossModel {
    pub fn new(kind: LossKind) -> Self {
        LossModel { kind, delta: 0.0 }
    }

    /// Returns a copy with `delta` added to the conjugate perturbation,
    /// i.e. the conjugate becomes `phi* + delta y^2 / 2` and the loss turns
    /// into its Moreau smoothing with `gamma` increased accordingly.
    pub fn perturbed(&self, delta: f64) -> Self {
        assert!(delta >= 0.0 && delta.is_finite());
        LossModel {
            kind: self.kind,
            delta: self.delta + delta,
        }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Strong-convexity modulus of the conjugate; the loss itself is
    /// `(1/gamma)`-smooth. Zero only for the unperturbed hinge.
    pub fn gamma(&self) -> f64 {
        let base = match self.kind {
            LossKind::Squared => 1.0,
            LossKind::SmoothedHinge => 1.0,
            LossKind::Logistic => 4.0,
            LossKind::Hinge => 0.0,
        };
        base + self.delta
    }

    /// Lipschitz constant of the loss when finite (squared is unbounded).
    pub fn lipschitz(&self) -> Option<f64> {
        match self.kind {
            LossKind::Squared => None,
            LossKind::SmoothedHinge | LossKind::Logistic | LossKind::Hinge => Some(1.0),
        }
    }

    /// Closed interval of admissible dual values for label `b`; the
    /// conjugate is `+inf` outside. Unbounded for the squared loss.
    pub fn conjugate_domain(&self, b: f64) -> (f64, f64) {
        match self.kind {
            LossKind::Squared => (f64::NEG_INFINITY, f64::INFINITY),
            // b*y in [-1, 0]
            _ => {
                if b > 0.0 {
                    (-1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
        }
    }

    /// Projects `y` onto the conjugate domain.
    pub fn clamp_to_domain(&self, y: f64, b: f64) -> f64 {
        let (lo, hi) = self.conjugate_domain(b);
        y.clamp(lo, hi)
    }

    pub fn validate_label(&self, b: f64) -> Result<(), LossError> {
        if self.kind.is_classification() && b != 1.0 && b != -1.0 {
            return Err(LossError::InvalidLabel(b));
        }
        if !b.is_finite() {
            return Err(LossError::InvalidLabel(b));
        }
        Ok(())
    }

    /// Loss value `phi(z)` for label `b`. For a perturbed model this is the
    /// Moreau smoothing `max_y { zy - phi*(y) - delta y^2 / 2 }`, evaluated
    /// through the prox solve.
    pub fn value(&self, z: f64, b: f64) -> f64 {
        if self.delta == 0.0 {
            return base_value(self.kind, z, b);
        }
        let y = base_prox(self.kind, b, z, 0.0, self.delta)
            .expect("perturbed prox cannot diverge with y_old = 0");
        z * y - base_conjugate(self.kind, y, b) - 0.5 * self.delta * y * y
    }

    /// Derivative `phi'(z)`; requires a smooth model (`gamma() > 0`).
    pub fn derivative(&self, z: f64, b: f64) -> f64 {
        if self.delta > 0.0 {
            // Envelope theorem: the maximizer of the smoothed conjugate
            // problem is the derivative.
            return base_prox(self.kind, b, z, 0.0, self.delta)
                .expect("perturbed prox cannot diverge with y_old = 0");
        }
        match self.kind {
            LossKind::Squared => z - b,
            LossKind::SmoothedHinge => {
                let bz = b * z;
                if bz >= 1.0 {
                    0.0
                } else if bz <= 0.0 {
                    -b
                } else {
                    -b * (1.0 - bz)
                }
            }
            LossKind::Logistic => -b * sigmoid(-b * z),
            LossKind::Hinge => panic!("derivative of the unperturbed hinge loss"),
        }
    }

    /// Conjugate value `phi*(y)` (`+inf` outside the domain), including the
    /// perturbation term.
    pub fn conjugate(&self, y: f64, b: f64) -> f64 {
        let base = base_conjugate(self.kind, y, b);
        if base.is_infinite() {
            return base;
        }
        base + 0.5 * self.delta * y * y
    }

    /// Derivative of the conjugate at an interior point of its domain.
    pub fn conjugate_derivative(&self, y: f64, b: f64) -> f64 {
        let base = match self.kind {
            LossKind::Squared | LossKind::SmoothedHinge => b + y,
            LossKind::Hinge => b,
            LossKind::Logistic => {
                let s = -b * y;
                -b * (s / (1.0 - s)).ln()
            }
        };
        base + self.delta * y
    }

    /// Solves `argmax_beta { beta*inner - phi*(beta) - (w/2)(beta - y_old)^2 }`
    /// for `w > 0`; the objective is strongly concave so the maximizer is
    /// unique. `y_old` is clipped into the conjugate domain on entry.
    pub fn dual_prox(&self, b: f64, inner: f64, y_old: f64, w: f64) -> Result<f64, LossError> {
        debug_assert!(w > 0.0);
        let y_old = self.clamp_to_domain(y_old, b);
        if self.delta == 0.0 {
            base_prox(self.kind, b, inner, y_old, w)
        } else {
            // The perturbation quadratic folds into the prox weight:
            // delta*beta^2/2 + (w/2)(beta - y_old)^2
            //   = ((w+delta)/2)(beta - w*y_old/(w+delta))^2 + const.
            let w2 = w + self.delta;
            base_prox(self.kind, b, inner, w * y_old / w2, w2)
        }
    }
}

fn base_value(kind: LossKind, z: f64, b: f64) -> f64 {
    match kind {
        LossKind::Squared => 0.5 * (z - b) * (z - b),
        LossKind::SmoothedHinge => {
            let bz = b * z;
            if bz >= 1.0 {
                0.0
            } else if bz <= 0.0 {
                0.5 - bz
            } else {
                0.5 * (1.0 - bz) * (1.0 - bz)
            }
        }
        // log(1 + exp(-t)) = max(0, -t) + log1p(exp(-|t|)), safe for |t| > 700.
        LossKind::Logistic => {
            let t = b * z;
            (0.0f64).max(-t) + (-t.abs()).exp().ln_1p()
        }
        LossKind::Hinge => (0.0f64).max(1.0 - b * z),
    }
}

fn base_conjugate(kind: LossKind, y: f64, b: f64) -> f64 {
    match kind {
        LossKind::Squared => y * b + 0.5 * y * y,
        LossKind::SmoothedHinge => {
            let by = b * y;
            if (-1.0..=0.0).contains(&by) {
                by + 0.5 * y * y
            } else {
                f64::INFINITY
            }
        }
        LossKind::Hinge => {
            let by = b * y;
            if (-1.0..=0.0).contains(&by) {
                by
            } else {
                f64::INFINITY
            }
        }
        LossKind::Logistic => {
            let s = -b * y;
            if !(0.0..=1.0).contains(&s) {
                return f64::INFINITY;
            }
            // s log s + (1-s) log(1-s) with the 0 log 0 := 0 limit.
            let mut v = 0.0;
            if s > 0.0 {
                v += s * s.ln();
            }
            if s < 1.0 {
                v += (1.0 - s) * (1.0 - s).ln();
            }
            v
        }
    }
}

fn base_prox(kind: LossKind, b: f64, inner: f64, y_old: f64, w: f64) -> Result<f64, LossError> {
    match kind {
        LossKind::Squared => Ok((inner - b + w * y_old) / (1.0 + w)),
        LossKind::SmoothedHinge => {
            let (lo, hi) = domain_interval(b);
            Ok(((inner - b + w * y_old) / (1.0 + w)).clamp(lo, hi))
        }
        LossKind::Hinge => {
            let (lo, hi) = domain_interval(b);
            Ok((y_old + (inner - b) / w).clamp(lo, hi))
        }
        LossKind::Logistic => {
            let s0 = sigmoid(-b * inner).clamp(1e-9, 1.0 - 1e-9);
            logistic_prox_newton(b, inner, y_old, w, s0)
        }
    }
}

fn domain_interval(b: f64) -> (f64, f64) {
    if b > 0.0 {
        (-1.0, 0.0)
    } else {
        (0.0, 1.0)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Safeguarded Newton solve of the logistic dual prox in the variable
/// `s = -b*beta` over (0, 1). The stationarity condition is
/// `g(s) = ln(s/(1-s)) + w*(s - s_old) + b*inner = 0` with `g` strictly
/// increasing, so a bisection bracket keeps Newton safe.
fn logistic_prox_newton(b: f64, inner: f64, y_old: f64, w: f64, s_start: f64) -> Result<f64, LossError> {
    let s_old = -b * y_old;
    let c = b * inner - w * s_old;
    let tol = 1e-12 * (1.0 + inner.abs());
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut s = s_start.clamp(1e-15, 1.0 - 1e-15);
    for _ in 0..NEWTON_MAX_ITERS {
        let g = (s / (1.0 - s)).ln() + w * s + c;
        if g.abs() <= tol {
            return Ok(-b * s);
        }
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        if hi - lo <= 1e-15 {
            return Ok(-b * 0.5 * (lo + hi));
        }
        let gp = 1.0 / (s * (1.0 - s)) + w;
        let mut next = s - g / gp;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        s = next;
    }
    Err(LossError::ProxNoConvergence {
        iters: NEWTON_MAX_ITERS,
        inner,
        w,
    })
}
