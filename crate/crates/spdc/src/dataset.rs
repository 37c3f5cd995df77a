//! Training data: sparse feature rows, labels, and cached row norms.
//!
//! A [`DataSet`] is immutable after construction and can be shared freely
//! across threads. All constructors validate the same invariants: feature
//! indices within each row are strictly increasing, every stored value is
//! finite, and the cached norms match the rows they were computed from.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Errors raised while constructing or transforming a [`DataSet`].
#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty input: no samples")]
    EmptyInput,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("row index {index} out of range (n = {n})")]
    RowIndexOutOfRange { index: usize, n: usize },
    #[error("scale factor must be positive, got {0}")]
    NonPositiveFactor(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("feature index {index} not below dimension {dim}")]
    FeatureIndexOutOfRange { index: usize, dim: usize },
    #[error("feature indices not strictly increasing")]
    IndicesNotIncreasing,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One sparse feature vector: parallel arrays of strictly increasing
/// indices and their values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRow {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        SparseRow { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(self.values.iter())
            .map(|(&j, &v)| (j as usize, v))
    }

    /// Euclidean norm of the row.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Inner product with a dense vector.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(j, v)| v * x[j]).sum()
    }
}

/// Immutable training set of `n` sparse rows `a_i` with labels `b_i`.
///
/// `max_norm` caches `R = max_i ||a_i||` and `mean_norm` caches the average
/// norm; both drive the solver step-size formulas.
#[derive(Debug, Clone)]
pub struct DataSet {
    n: usize,
    d: usize,
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    row_norms: Vec<f64>,
    max_norm: f64,
    mean_norm: f64,
}

impl DataSet {
    /// Builds a data set from rows and labels, validating invariants and
    /// precomputing norms. The dimension is the larger of `dim_override`
    /// and `1 + max feature index`.
    pub fn from_rows(
        rows: Vec<SparseRow>,
        labels: Vec<f64>,
        dim_override: Option<usize>,
    ) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::EmptyInput);
        }
        assert_eq!(rows.len(), labels.len(), "rows/labels length mismatch");
        let mut d = dim_override.unwrap_or(0);
        for row in &rows {
            let mut prev: Option<u32> = None;
            for (k, &j) in row.indices.iter().enumerate() {
                if let Some(p) = prev {
                    if j <= p {
                        return Err(DataError::IndicesNotIncreasing);
                    }
                }
                prev = Some(j);
                if !row.values[k].is_finite() {
                    return Err(DataError::NonFinite("feature value"));
                }
                d = d.max(j as usize + 1);
            }
        }
        if labels.iter().any(|b| !b.is_finite()) {
            return Err(DataError::NonFinite("label"));
        }
        let d = d.max(1);
        Ok(Self::assemble(rows, labels, d))
    }

    fn assemble(rows: Vec<SparseRow>, labels: Vec<f64>, d: usize) -> Self {
        let n = rows.len();
        let row_norms: Vec<f64> = rows.iter().map(|r| r.norm()).collect();
        let max_norm = row_norms.iter().cloned().fold(0.0, f64::max);
        let mean_norm = row_norms.iter().sum::<f64>() / n as f64;
        DataSet {
            n,
            d,
            rows,
            labels,
            row_norms,
            max_norm,
            mean_norm,
        }
    }

    /// Parses LIBSVM text: one sample per line, `label idx:val idx:val ...`
    /// with 1-based indices on disk (0-based in memory). Blank lines and
    /// trailing whitespace are tolerated; indices must be strictly
    /// increasing within a line.
    pub fn parse_libsvm(reader: impl BufRead, dim_override: Option<usize>) -> Result<Self, DataError> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let mut tokens = line.split_whitespace();
            let Some(first) = tokens.next() else {
                continue; // blank line
            };
            let label: f64 = first.parse().map_err(|_| DataError::Parse {
                line: lineno,
                msg: format!("bad label `{first}`"),
            })?;
            if !label.is_finite() {
                return Err(DataError::Parse {
                    line: lineno,
                    msg: format!("non-finite label `{first}`"),
                });
            }
            let mut indices = Vec::new();
            let mut values = Vec::new();
            let mut prev: Option<u32> = None;
            for tok in tokens {
                let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| DataError::Parse {
                    line: lineno,
                    msg: format!("malformed feature token `{tok}`"),
                })?;
                let idx: u64 = idx_str.parse().map_err(|_| DataError::Parse {
                    line: lineno,
                    msg: format!("bad index `{idx_str}`"),
                })?;
                if idx == 0 || idx > u32::MAX as u64 {
                    return Err(DataError::Parse {
                        line: lineno,
                        msg: format!("index {idx} out of range (1-based)"),
                    });
                }
                let idx = (idx - 1) as u32;
                if prev.is_some_and(|p| idx <= p) {
                    return Err(DataError::Parse {
                        line: lineno,
                        msg: "indices not increasing".to_string(),
                    });
                }
                prev = Some(idx);
                let val: f64 = val_str.parse().map_err(|_| DataError::Parse {
                    line: lineno,
                    msg: format!("bad value `{val_str}`"),
                })?;
                if !val.is_finite() {
                    return Err(DataError::Parse {
                        line: lineno,
                        msg: format!("non-finite value `{val_str}`"),
                    });
                }
                indices.push(idx);
                values.push(val);
            }
            rows.push(SparseRow::new(indices, values));
            labels.push(label);
        }
        if rows.is_empty() {
            return Err(DataError::EmptyInput);
        }
        Self::from_rows(rows, labels, dim_override)
    }

    /// Writes the set back out in LIBSVM text form (1-based indices,
    /// shortest round-trip decimal formatting).
    pub fn write_libsvm(&self, mut w: impl Write) -> std::io::Result<()> {
        for (row, &b) in self.rows.iter().zip(&self.labels) {
            write!(w, "{b}")?;
            for (j, v) in row.iter() {
                write!(w, " {}:{v}", j + 1)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Draws `n` regression samples `a ~ N(0, diag(j^-2))`, `b = <a, 1> + eps`
    /// with `eps ~ N(0,1)`. Rows carry a fully dense index pattern so sparse
    /// and dense solver paths see the same representation. Deterministic for
    /// a fixed seed; per sample the `d` feature normals are drawn first,
    /// then the noise term.
    pub fn generate_synthetic(n: usize, d: usize, seed: u64) -> Self {
        assert!(n >= 1 && d >= 1, "n and d must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let mut values = Vec::with_capacity(d);
            let mut pred = 0.0;
            for j in 0..d {
                let std = 1.0 / (j as f64 + 1.0);
                let v: f64 = normal.sample(&mut rng);
                let v = v * std;
                pred += v; // x* is the all-ones vector
                values.push(v);
            }
            let eps: f64 = normal.sample(&mut rng);
            rows.push(SparseRow::new((0..d as u32).collect(), values));
            labels.push(pred + eps);
        }
        Self::assemble(rows, labels, d)
    }

    /// Returns a copy with the given rows multiplied by `factor` and all
    /// norms recomputed. Duplicate indices are scaled once.
    pub fn scale_rows(&self, index_set: &[usize], factor: f64) -> Result<Self, DataError> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(DataError::NonPositiveFactor(factor));
        }
        let mut picked = index_set.to_vec();
        picked.sort_unstable();
        picked.dedup();
        if let Some(&bad) = picked.iter().find(|&&i| i >= self.n) {
            return Err(DataError::RowIndexOutOfRange { index: bad, n: self.n });
        }
        let mut rows = self.rows.clone();
        for &i in &picked {
            for v in rows[i].values.iter_mut() {
                *v *= factor;
            }
        }
        Ok(Self::assemble(rows, self.labels.clone(), self.d))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row_norms[i]
    }

    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    /// `R = max_i ||a_i||`.
    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    /// Average row norm.
    pub fn mean_norm(&self) -> f64 {
        self.mean_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_norms(ds: &DataSet) {
        for i in 0..ds.n() {
            let expect = ds.row(i).norm();
            let got = ds.row_norm(i);
            let scale = expect.abs().max(1.0);
            assert!((expect - got).abs() <= 1e-12 * scale);
        }
        let max = ds.row_norms().iter().cloned().fold(0.0, f64::max);
        assert_eq!(ds.max_norm(), max);
        let mean = ds.row_norms().iter().sum::<f64>() / ds.n() as f64;
        assert!((ds.mean_norm() - mean).abs() <= 1e-15 * mean.max(1.0));
    }

    #[test]
    fn parses_two_line_sample() {
        let text = "+1 1:0.5 3:2.0\n-1 2:1.0";
        let ds = DataSet::parse_libsvm(text.as_bytes(), None).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.labels(), &[1.0, -1.0]);
        assert_eq!(ds.row(0).indices(), &[0, 2]);
        assert!((ds.row_norm(0) - 4.25f64.sqrt()).abs() < 1e-15);
        assert!((ds.row_norm(1) - 1.0).abs() < 1e-15);
        check_norms(&ds);
    }

    #[test]
    fn empty_input_is_an_error() {
        let err = DataSet::parse_libsvm("".as_bytes(), None).unwrap_err();
        assert!(matches!(err, DataError::EmptyInput));
        // Blank lines only are still empty.
        let err = DataSet::parse_libsvm("\n  \n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, DataError::EmptyInput));
    }

    #[test]
    fn non_increasing_indices_fail_with_line_number() {
        let err = DataSet::parse_libsvm("1 3:1 2:1".as_bytes(), None).unwrap_err();
        match err {
            DataError::Parse { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("not increasing"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_tokens_fail_with_line_number() {
        for (text, want_line) in [
            ("1 a:1", 1),
            ("1 1:1\n-1 2:x", 2),
            ("abc 1:1", 1),
            ("1 0:1", 1),
            ("1 1", 1),
            ("1 1:inf", 1),
        ] {
            let err = DataSet::parse_libsvm(text.as_bytes(), None).unwrap_err();
            match err {
                DataError::Parse { line, .. } => assert_eq!(line, want_line, "text {text:?}"),
                other => panic!("unexpected error {other:?} for {text:?}"),
            }
        }
    }

    #[test]
    fn dim_override_takes_the_larger_value() {
        let ds = DataSet::parse_libsvm("1 2:1.0".as_bytes(), Some(10)).unwrap();
        assert_eq!(ds.dim(), 10);
        let ds = DataSet::parse_libsvm("1 20:1.0".as_bytes(), Some(10)).unwrap();
        assert_eq!(ds.dim(), 20);
    }

    #[test]
    fn libsvm_round_trip_is_exact() {
        let ds = DataSet::generate_synthetic(7, 5, 42);
        let mut buf = Vec::new();
        ds.write_libsvm(&mut buf).unwrap();
        let back = DataSet::parse_libsvm(buf.as_slice(), None).unwrap();
        assert_eq!(back.n(), ds.n());
        assert_eq!(back.dim(), ds.dim());
        for i in 0..ds.n() {
            assert_eq!(back.row(i), ds.row(i));
            assert_eq!(back.label(i), ds.label(i));
        }
        check_norms(&back);
    }

    #[test]
    fn synthetic_is_deterministic_and_dense() {
        let a = DataSet::generate_synthetic(5, 4, 9);
        let b = DataSet::generate_synthetic(5, 4, 9);
        for i in 0..5 {
            assert_eq!(a.row(i), b.row(i));
            assert_eq!(a.label(i), b.label(i));
            assert_eq!(a.row(i).nnz(), 4);
        }
        check_norms(&a);
        let single = DataSet::generate_synthetic(1, 1, 3);
        assert_eq!(single.n(), 1);
        assert_eq!(single.dim(), 1);
        assert!(single.label(0).is_finite());
    }

    #[test]
    fn synthetic_column_variances_match_the_covariance() {
        // Monte-Carlo check of Var(a_j) = j^-2 for j in {1, 2, 10} (1-based).
        let n = 100_000;
        let ds = DataSet::generate_synthetic(n, 10, 1234);
        for j in [1usize, 2, 10] {
            let col: Vec<f64> = (0..n).map(|i| ds.row(i).values()[j - 1]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let expect = 1.0 / (j * j) as f64;
            assert!(
                (var - expect).abs() <= 0.05 * expect,
                "column {j}: var {var} vs {expect}"
            );
        }
    }

    #[test]
    fn scale_rows_recomputes_norms() {
        // Unit-norm rows, then scale row 0 by 100.
        let rows: Vec<SparseRow> = (0..4)
            .map(|i| SparseRow::new(vec![i as u32], vec![1.0]))
            .collect();
        let ds = DataSet::from_rows(rows, vec![1.0; 4], None).unwrap();
        let scaled = ds.scale_rows(&[0], 100.0).unwrap();
        assert_eq!(scaled.max_norm(), 100.0);
        let want_mean = (100.0 + 3.0) / 4.0;
        assert!((scaled.mean_norm() - want_mean).abs() < 1e-12);
        check_norms(&scaled);

        // Identity cases.
        let same = ds.scale_rows(&[1], 1.0).unwrap();
        assert_eq!(same.row(1), ds.row(1));
        let same = ds.scale_rows(&[], 2.0).unwrap();
        for i in 0..4 {
            assert_eq!(same.row(i), ds.row(i));
        }

        assert!(ds.scale_rows(&[9], 2.0).is_err());
        assert!(ds.scale_rows(&[0], 0.0).is_err());
        assert!(ds.scale_rows(&[0], -1.0).is_err());
    }
}
