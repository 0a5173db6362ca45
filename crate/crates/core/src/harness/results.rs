//! Aggregated experiment results and their CSV form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

pub const CSV_HEADER: &str = "solver,param_name,param_value,metric,stderr,trials";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub solver: String,
    pub param_name: String,
    pub param_value: f64,
    /// Mean over successful trials (MNSE or accuracy).
    pub metric: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    pub trials: usize,
    /// Trials whose solver returned an error; not part of the mean.
    pub failures: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Rows ordered by solver name, then parameter value ascending.
    pub fn sorted_rows(&self) -> Vec<&ResultRow> {
        let mut rows: Vec<&ResultRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.solver
                .cmp(&b.solver)
                .then(a.param_value.total_cmp(&b.param_value))
        });
        rows
    }

    pub fn get(&self, solver: &str, param_value: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.solver == solver && r.param_value == param_value)
    }
}

/// Mean and standard error of `samples`. Samples are sorted before summing
/// so the result does not depend on trial order.
pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = s.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Writes `preamble` lines prefixed with `# `, the CSV header and the rows.
pub fn write_results<W: Write>(table: &ResultTable, preamble: &[String], w: &mut W) -> Result<()> {
    for line in preamble {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in table.sorted_rows() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.solver, r.param_name, r.param_value, r.metric, r.stderr, r.trials
        )?;
    }
    Ok(())
}

pub fn emit_results(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    emit_results_with_preamble(table, &[], path)
}

pub fn emit_results_with_preamble(table: &ResultTable, preamble: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_results(table, preamble, &mut w)?;
    w.flush()?;
    Ok(())
}
