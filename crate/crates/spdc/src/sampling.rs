//! Randomized index selection: uniform mini-batch subsets and the static
//! weighted distribution with O(1) alias-table draws.

use rand::Rng;

use crate::dataset::DataSet;

/// Static sampling distribution `p_k = (1-alpha)/n + alpha ||a_k|| / sum ||a_i||`,
/// a strict convex combination of the uniform distribution and the
/// norm-proportional one. Built once per run; draws are O(1) via an alias
/// table.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    p: Vec<f64>,
    cutoff: Vec<f64>,
    alias: Vec<usize>,
}

impl SamplingPlan {
    pub fn weighted(ds: &DataSet, alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
        let n = ds.n();
        let norm_sum: f64 = ds.row_norms().iter().sum();
        let uniform = (1.0 - alpha) / n as f64;
        let p: Vec<f64> = ds
            .row_norms()
            .iter()
            .map(|&nm| uniform + alpha * nm / norm_sum)
            .collect();
        Self::from_probabilities(p)
    }

    /// Vose alias construction; `p` need not sum to exactly one.
    fn from_probabilities(p: Vec<f64>) -> Self {
        let n = p.len();
        let total: f64 = p.iter().sum();
        let mut cutoff: Vec<f64> = p.iter().map(|&v| v * n as f64 / total).collect();
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, &c) in cutoff.iter().enumerate() {
            if c < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
            alias[s] = l;
            cutoff[l] += cutoff[s] - 1.0;
            if cutoff[l] < 1.0 {
                small.push(l);
            } else {
                large.push(l);
            }
        }
        SamplingPlan { p, cutoff, alias }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.p[k]
    }

    /// One O(1) draw consuming a single uniform variate.
    pub fn draw(&self, rng: &mut impl Rng) -> usize {
        let n = self.p.len();
        let v: f64 = rng.random::<f64>() * n as f64;
        let i = (v as usize).min(n - 1);
        let frac = v - i as f64;
        if frac < self.cutoff[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Uniform random `m`-subset of `{0, .., n-1}` by Floyd's algorithm, so each
/// index is included with probability `m/n` without any divisibility
/// assumption. The result is sorted ascending so downstream reductions have
/// a fixed summation order.
pub fn sample_subset(rng: &mut impl Rng, n: usize, m: usize, out: &mut Vec<usize>) {
    debug_assert!(1 <= m && m <= n);
    out.clear();
    if m == n {
        out.extend(0..n);
        return;
    }
    let mut chosen = std::collections::HashSet::with_capacity(m * 2);
    for j in (n - m)..n {
        let t = rng.random_range(0..=j);
        if chosen.contains(&t) {
            chosen.insert(j);
            out.push(j);
        } else {
            chosen.insert(t);
            out.push(t);
        }
    }
    out.sort_unstable();
}
