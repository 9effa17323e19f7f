//! Result rows and CSV output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
    Bound,
    Baseline,
}

/// Raised on a Monte Carlo row whose 95% interval misses the paired
/// closed-form value.
pub const FLAG_CI_EXCLUDES: &str = "ci_excludes_closed_form";

/// One output line. Interval columns are empty for non-sampled rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub sweep_variable: String,
    pub sweep_value: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_trials: Option<usize>,
    pub seed: Option<u64>,
    pub method: Method,
    pub flag: String,
}

impl ResultRow {
    pub fn new(scenario_id: &str, metric: &str, value: f64, method: Method) -> Self {
        Self {
            scenario_id: scenario_id.to_string(),
            sweep_variable: String::new(),
            sweep_value: None,
            metric: metric.to_string(),
            value,
            ci_low: None,
            ci_high: None,
            n_trials: None,
            seed: None,
            method,
            flag: String::new(),
        }
    }

    pub fn at(mut self, variable: &str, value: Option<f64>) -> Self {
        self.sweep_variable = variable.to_string();
        self.sweep_value = value;
        self
    }

    pub fn sampled(mut self, ci: (f64, f64), n_trials: usize, seed: u64) -> Self {
        self.ci_low = Some(ci.0);
        self.ci_high = Some(ci.1);
        self.n_trials = Some(n_trials);
        self.seed = Some(seed);
        self
    }

    pub fn flagged(mut self, flag: &str) -> Self {
        self.flag = flag.to_string();
        self
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_rows(std::fs::File::create(path)?, rows)
}

pub fn to_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
