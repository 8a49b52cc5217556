//! Flat metric reports: a `#`-prefixed config block followed by
//! `metric,value,unit,provenance` rows.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// Where a value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Computed from the input data.
    Measured,
    /// Closed form from a fitted or configured model.
    Model,
    /// Output of a simulation run.
    Simulated,
    /// Count or parameter echoed from the run itself.
    Run,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Measured => "measured",
            Self::Model => "model",
            Self::Simulated => "simulated",
            Self::Run => "run",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRecord {
    pub metric: String,
    pub value: f64,
    pub unit: String,
    pub provenance: String,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    config: Vec<(String, String)>,
    rows: Vec<ReportRecord>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.config("command", command);
        r
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    /// Adds a row; non-finite values and empty units are data errors.
    pub fn push(&mut self, metric: &str, value: f64, unit: &str, prov: Provenance) -> Result<&mut Self, CliError> {
        self.push_tagged(metric, value, unit, prov.as_str())
    }

    pub fn push_tagged(&mut self, metric: &str, value: f64, unit: &str, prov: &str) -> Result<&mut Self, CliError> {
        if !value.is_finite() {
            return Err(CliError::Data(format!("metric {metric} is not finite ({value})")));
        }
        if unit.is_empty() {
            return Err(CliError::Data(format!("metric {metric} has no unit")));
        }
        self.rows.push(ReportRecord { metric: metric.into(), value, unit: unit.into(), provenance: prov.into() });
        Ok(self)
    }

    pub fn rows(&self) -> &[ReportRecord] {
        &self.rows
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.metric == metric).map(|r| r.value)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out.push_str("metric,value,unit,provenance\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.metric, r.value, r.unit, r.provenance);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, self.render().as_bytes())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Builds a CSV table from a header and rows of already formatted cells.
pub fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_reject() {
        let mut r = Report::new("stats");
        r.config("seed", 3);
        r.push("mean_kbps", 12.5, "kbps", Provenance::Measured).unwrap();
        assert!(r.push("bad", f64::NAN, "kbps", Provenance::Measured).is_err());
        assert!(r.push("bad", 1.0, "", Provenance::Measured).is_err());
        assert_eq!(
            r.render(),
            "# command = stats\n# seed = 3\nmetric,value,unit,provenance\nmean_kbps,12.5,kbps,measured\n"
        );
        assert_eq!(r.get("mean_kbps"), Some(12.5));
    }
}
