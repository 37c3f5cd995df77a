//! Regularizers: value, conjugate, strong convexity, the coordinate-wise
//! primal proximal step, and the O(1) catch-up closed forms that let the
//! sparse solver delay updates on untouched coordinates.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegError {
    #[error("coefficient {name} must be finite and non-negative, got {value}")]
    BadCoefficient { name: &'static str, value: f64 },
}

/// `g(x) = lambda1 ||x||_1 + (lambda2/2) ||x||^2`; `lambda1 = 0` is the pure
/// squared-L2 penalty. `lambda2` is the strong-convexity modulus the solver
/// step sizes depend on; a zero `lambda2` is only admissible through the
/// perturbation wrapper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularizer {
    lambda1: f64,
    lambda2: f64,
}

impl Regularizer {
    pub fn squared_l2(lambda: f64) -> Result<Self, RegError> {
        Self::elastic_net(0.0, lambda)
    }

    pub fn elastic_net(lambda1: f64, lambda2: f64) -> Result<Self, RegError> {
        if !lambda1.is_finite() || lambda1 < 0.0 {
            return Err(RegError::BadCoefficient {
                name: "lambda1",
                value: lambda1,
            });
        }
        if !lambda2.is_finite() || lambda2 < 0.0 {
            return Err(RegError::BadCoefficient {
                name: "lambda2",
                value: lambda2,
            });
        }
        Ok(Regularizer { lambda1, lambda2 })
    }

    /// Adds `delta` to the quadratic coefficient (the perturbation wrapper).
    pub fn perturbed(&self, delta: f64) -> Self {
        assert!(delta >= 0.0 && delta.is_finite());
        Regularizer {
            lambda1: self.lambda1,
            lambda2: self.lambda2 + delta,
        }
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Strong-convexity modulus (the `lambda` of the step-size formulas).
    pub fn strong_convexity(&self) -> f64 {
        self.lambda2
    }

    pub fn is_l2(&self) -> bool {
        self.lambda1 == 0.0
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for &v in x {
            l1 += v.abs();
            l2 += v * v;
        }
        self.lambda1 * l1 + 0.5 * self.lambda2 * l2
    }

    /// Conjugate `g*(u)`; for the elastic net this is
    /// `(1/(2*lambda2)) * sum_j max(|u_j| - lambda1, 0)^2`.
    pub fn conjugate(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &v in u {
            let e = (v.abs() - self.lambda1).max(0.0);
            acc += e * e;
        }
        if acc == 0.0 {
            0.0
        } else {
            acc / (2.0 * self.lambda2) // +inf when lambda2 = 0 and u escapes the l1 ball
        }
    }

    /// Coordinate-wise proximal step: the minimizer of
    /// `g_j(a) + grad*a + (a - x_old)^2 / (2*tau)`.
    /// Soft-threshold ties (`|x_old - tau*grad| == tau*lambda1`) land on the
    /// zero branch.
    #[inline]
    pub fn prox_coord(&self, x_old: f64, grad: f64, tau: f64) -> f64 {
        let v = x_old - tau * grad;
        let shift = tau * self.lambda1;
        if v > shift {
            (v - shift) / (1.0 + self.lambda2 * tau)
        } else if v < -shift {
            (v + shift) / (1.0 + self.lambda2 * tau)
        } else {
            0.0
        }
    }

    /// Value of `x_j` after `k` consecutive untouched iterations
    /// (`u_j` frozen at `u`), in O(1).
    pub fn catch_up(&self, x0: f64, u: f64, tau: f64, k: u64) -> f64 {
        if self.lambda1 == 0.0 {
            catchup_l2(x0, u, self.lambda2, tau, k)
        } else {
            catchup_elastic(x0, u, self.lambda1, self.lambda2, tau, k)
        }
    }

    /// Catch-up for the stored pair `(x_j at last touch, x_j one step
    /// earlier)`; `k = 0` returns the pair unchanged.
    pub fn catch_up_pair(&self, x_at: f64, x_prev_at: f64, u: f64, tau: f64, k: u64) -> (f64, f64) {
        if k == 0 {
            (x_at, x_prev_at)
        } else {
            (
                self.catch_up(x_at, u, tau, k),
                self.catch_up(x_at, u, tau, k - 1),
            )
        }
    }
}

/// `k` steps of `x <- (x - tau*u) / (1 + lambda*tau)`, evaluated as
/// `decay*x0 + (u/lambda)*(decay - 1)` with `decay = (1+lambda*tau)^-k`.
/// The `exp_m1` form avoids the cancellation of the textbook expression
/// when `u/lambda` dwarfs `x0`, and makes `x0 = -u/lambda` an exact fixed
/// point.
pub fn catchup_l2(x0: f64, u: f64, lambda: f64, tau: f64, k: u64) -> f64 {
    debug_assert!(lambda > 0.0 && tau > 0.0);
    geometric_steps(x0, u / lambda, lambda, tau, k)
}

fn geometric_steps(x0: f64, c: f64, lambda2: f64, tau: f64, k: u64) -> f64 {
    if k == 0 {
        return x0;
    }
    let a = k as f64 * (lambda2 * tau).ln_1p();
    let em = (-a).exp_m1(); // decay - 1
    (em + 1.0) * x0 + c * em
}

/// `k` steps of the elastic-net soft-threshold recursion with `u` frozen,
/// in O(1). The iterate is monotone, so it moves through at most three sign
/// regimes (positive, zero, negative); each regime has a geometric closed
/// form and the regime boundary is located from the logarithmic bound, then
/// verified against the closed form to guard against boundary
/// misclassification.
pub fn catchup_elastic(x0: f64, u: f64, lambda1: f64, lambda2: f64, tau: f64, k: u64) -> f64 {
    debug_assert!(lambda1 >= 0.0 && lambda2 > 0.0 && tau > 0.0);
    if lambda1 == 0.0 {
        return catchup_l2(x0, u, lambda2, tau, k);
    }
    let reg = Regularizer { lambda1, lambda2 };
    let mut x = x0;
    let mut rem = k;
    let mut regimes = 0u32;
    while rem > 0 {
        regimes += 1;
        debug_assert!(regimes <= 3, "monotone iterate re-entered a sign regime");
        if x == 0.0 {
            return if -u > lambda1 {
                geometric_steps(x, (u + lambda1) / lambda2, lambda2, tau, rem)
            } else if -u < -lambda1 {
                geometric_steps(x, (u - lambda1) / lambda2, lambda2, tau, rem)
            } else {
                0.0
            };
        }
        let positive = x > 0.0;
        let c = if positive {
            (u + lambda1) / lambda2
        } else {
            (u - lambda1) / lambda2
        };
        let stays = if positive { -u >= lambda1 } else { -u <= -lambda1 };
        if stays {
            return geometric_steps(x, c, lambda2, tau, rem);
        }
        // Largest step count for which the current sign regime still holds;
        // in the crossing case c and x share a sign, so x/c > 0.
        let bound = (x / c).ln_1p() / (lambda2 * tau).ln_1p();
        let mut s = if bound >= rem as f64 { rem } else { bound.max(0.0).floor() as u64 };
        let in_regime = |v: f64| if positive { v > 0.0 } else { v < 0.0 };
        while s > 0 && !in_regime(geometric_steps(x, c, lambda2, tau, s)) {
            s -= 1;
        }
        while s < rem && in_regime(geometric_steps(x, c, lambda2, tau, s + 1)) {
            s += 1;
        }
        if s >= rem {
            return geometric_steps(x, c, lambda2, tau, rem);
        }
        let edge = geometric_steps(x, c, lambda2, tau, s);
        let next = reg.prox_coord(edge, u, tau);
        // A floating-point tie at the sign boundary can leave `next` on the
        // old side by an ulp; the true value straddles zero, so take zero.
        x = if in_regime(next) { 0.0 } else { next };
        rem -= s + 1;
    }
    x
}
