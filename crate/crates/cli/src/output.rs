use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A command result in both renderings.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub tolerance: Option<f64>,
    pub result: Value,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(command: &'static str, config: &impl Serialize) -> Result<Self, CliError> {
        Ok(Self {
            command,
            config: serde_json::to_value(config)?,
            tolerance: None,
            result: Value::Null,
            header: Vec::new(),
            rows: Vec::new(),
        })
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn result(mut self, result: Value) -> Self {
        self.result = result;
        self
    }

    pub fn table(mut self, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        self.header = header;
        self.rows = rows;
        self
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Json => {
                let v = json!({
                    "command": self.command,
                    "config": self.config,
                    "tolerance": self.tolerance,
                    "result": self.result,
                });
                let mut out = serde_json::to_vec_pretty(&v)?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => {
                let mut out = Vec::new();
                writeln!(out, "# command: {}", self.command)?;
                writeln!(out, "# config: {}", serde_json::to_string(&self.config)?)?;
                if let Some(t) = self.tolerance {
                    writeln!(out, "# tolerance: {t:e}")?;
                }
                if self.header.is_empty() {
                    return Err(CliError::Validation(format!("`{}` has no tabular output; use --format json", self.command)));
                }
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.header).map_err(csv_err)?;
                for row in &self.rows {
                    w.write_record(row).map_err(csv_err)?;
                }
                w.into_inner().map_err(|e| CliError::Io(e.into_error()))
            }
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Shortest round-trip rendering of a float.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
