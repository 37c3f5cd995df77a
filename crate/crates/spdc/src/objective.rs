//! Primal/dual objective evaluation and the saddle-point function value.

use crate::dataset::DataSet;
use crate::loss::LossModel;
use crate::regularizer::Regularizer;

/// Kahan compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, term: f64) {
        let y = term - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Primal objective `P(x) = (1/n) sum_i phi_i(<a_i, x>) + g(x)`, with the
/// sample sum compensated.
pub fn eval_primal(ds: &DataSet, loss: &LossModel, reg: &Regularizer, x: &[f64]) -> f64 {
    let mut acc = KahanSum::default();
    for i in 0..ds.n() {
        acc.add(loss.value(ds.row(i).dot(x), ds.label(i)));
    }
    acc.value() / ds.n() as f64 + reg.value(x)
}

/// `u = (1/n) sum_i y_i a_i`.
pub fn dual_aggregate(ds: &DataSet, y: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; ds.dim()];
    for i in 0..ds.n() {
        let yi = y[i];
        if yi != 0.0 {
            for (j, v) in ds.row(i).iter() {
                u[j] += yi * v;
            }
        }
    }
    let inv_n = 1.0 / ds.n() as f64;
    for v in &mut u {
        *v *= inv_n;
    }
    u
}

/// Dual objective `D(y) = (1/n) sum_i -phi*_i(y_i) - g*(-u)`; returns
/// `-inf` when some `y_i` leaves its conjugate domain.
pub fn eval_dual(ds: &DataSet, loss: &LossModel, reg: &Regularizer, y: &[f64]) -> f64 {
    let u = dual_aggregate(ds, y);
    eval_dual_with_aggregate(ds, loss, reg, y, &u)
}

/// Same as [`eval_dual`] with a precomputed aggregate `u`.
pub fn eval_dual_with_aggregate(
    ds: &DataSet,
    loss: &LossModel,
    reg: &Regularizer,
    y: &[f64],
    u: &[f64],
) -> f64 {
    let mut acc = KahanSum::default();
    for i in 0..ds.n() {
        let c = loss.conjugate(y[i], ds.label(i));
        if c.is_infinite() {
            return f64::NEG_INFINITY;
        }
        acc.add(-c);
    }
    let neg_u: Vec<f64> = u.iter().map(|&v| -v).collect();
    let gstar = reg.conjugate(&neg_u);
    if gstar.is_infinite() {
        return f64::NEG_INFINITY;
    }
    acc.value() / ds.n() as f64 - gstar
}

/// Saddle function `f(x, y) = (1/n) sum_i (y_i <a_i, x> - phi*_i(y_i)) + g(x)`.
pub fn saddle_value(ds: &DataSet, loss: &LossModel, reg: &Regularizer, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = KahanSum::default();
    for i in 0..ds.n() {
        acc.add(y[i] * ds.row(i).dot(x) - loss.conjugate(y[i], ds.label(i)));
    }
    acc.value() / ds.n() as f64 + reg.value(x)
}

/// Condition number `kappa = R^2 / (lambda * gamma)`.
pub fn condition_number(r: f64, lambda: f64, gamma: f64) -> f64 {
    r * r / (lambda * gamma)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum()
}
