//! Convergence traces and their CSV serialization.
//!
//! Numbers are written with 17 significant digits in scientific notation so
//! that repeated runs of the same experiment produce byte-identical files;
//! the wall-clock column is opt-in for the same reason.

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace csv line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One record per trace cadence point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Equivalent passes over the data (`t * m / n`).
    pub pass: f64,
    /// Primal objective `P(x)`.
    pub primal: f64,
    /// Dual objective `D(y)`.
    pub dual: f64,
    /// `P(x) - D(y)`.
    pub gap: f64,
    /// `||x - x*||^2` when a reference is available.
    pub dist_x: Option<f64>,
    /// `||y - y*||^2` when a reference is available.
    pub dist_y: Option<f64>,
    /// Elapsed wall clock when requested.
    pub wall_ms: Option<f64>,
}

/// Trace options shared by the SPDC solvers and the baselines.
#[derive(Debug, Clone, Copy, Default)]
pub struct TraceOptions<'a> {
    /// Record every `cadence` pass boundaries (0 is treated as 1).
    pub cadence: u64,
    /// `(x*, y*)` used to fill the distance columns.
    pub reference: Option<(&'a [f64], &'a [f64])>,
    /// Record elapsed wall-clock milliseconds (breaks byte-stable output).
    pub wall_clock: bool,
    /// Trace the perturbed objective instead of the original one.
    pub perturbed_objective: bool,
}

impl TraceOptions<'_> {
    pub fn effective_cadence(&self) -> u64 {
        self.cadence.max(1)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last() {
            debug_assert!(record.pass > last.pass, "trace passes must increase");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// First recorded pass at which the gap is at or below `threshold`.
    pub fn first_pass_reaching(&self, threshold: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.gap <= threshold)
            .map(|r| r.pass)
    }

    /// Gap at the record closest to the requested pass count.
    pub fn gap_at_pass(&self, pass: f64) -> Option<f64> {
        self.records
            .iter()
            .min_by(|a, b| {
                let da = (a.pass - pass).abs();
                let db = (b.pass - pass).abs();
                da.partial_cmp(&db).unwrap()
            })
            .map(|r| r.gap)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let wall = self.records.first().is_some_and(|r| r.wall_ms.is_some());
        if wall {
            writeln!(w, "pass,primal,dual,gap,dist_x,dist_y,wall_ms")?;
        } else {
            writeln!(w, "pass,primal,dual,gap,dist_x,dist_y")?;
        }
        for r in &self.records {
            write!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.pass,
                r.primal,
                r.dual,
                r.gap,
                fmt_opt(r.dist_x),
                fmt_opt(r.dist_y),
            )?;
            if wall {
                write!(w, ",{}", fmt_opt(r.wall_ms))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn read_csv(reader: impl BufRead) -> Result<Self, TraceError> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => {
                return Err(TraceError::Parse {
                    line: 1,
                    msg: "empty trace file".into(),
                })
            }
        };
        let has_wall = header.trim_end().ends_with("wall_ms");
        let mut trace = ConvergenceTrace::default();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let want = if has_wall { 7 } else { 6 };
            if fields.len() != want {
                return Err(TraceError::Parse {
                    line: lineno,
                    msg: format!("expected {want} fields, found {}", fields.len()),
                });
            }
            let num = |s: &str| -> Result<f64, TraceError> {
                s.parse().map_err(|_| TraceError::Parse {
                    line: lineno,
                    msg: format!("bad number `{s}`"),
                })
            };
            let opt = |s: &str| -> Result<Option<f64>, TraceError> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            trace.records.push(TraceRecord {
                pass: num(fields[0])?,
                primal: num(fields[1])?,
                dual: num(fields[2])?,
                gap: num(fields[3])?,
                dist_x: opt(fields[4])?,
                dist_y: opt(fields[5])?,
                wall_ms: if has_wall { opt(fields[6])? } else { None },
            });
        }
        Ok(trace)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.16e}"))
}
