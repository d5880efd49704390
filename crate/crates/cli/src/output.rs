//! Data files and run manifests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use balance_core::analysis::export::CsvTable;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

/// A rendered table, detached from the value it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl Table {
    pub fn of<T: CsvTable + ?Sized>(t: &T) -> Self {
        Self { header: t.header(), records: t.records() }
    }

    /// One JSON object per record; numeric cells become numbers and empty
    /// cells null.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            let obj: Map<String, Value> = self.header.iter().cloned().zip(r.iter().map(|c| cell(c))).collect();
            serde_json::to_writer(&mut out, &obj)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

impl CsvTable for Table {
    fn header(&self) -> Vec<String> {
        self.header.clone()
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.records.clone()
    }
}

fn cell(c: &str) -> Value {
    if c.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = c.parse::<i64>() {
        return Value::from(i);
    }
    match c.parse::<f64>().ok().and_then(Number::from_f64) {
        Some(n) => Value::Number(n),
        None => Value::String(c.to_string()),
    }
}

pub fn write_table(path: &Path, table: &Table, format: Format) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let out = BufWriter::new(file);
    match format {
        Format::Csv => table.write_csv(out).map_err(|e| CliError::io(path, e)),
        Format::Jsonl => table.write_jsonl(out).map_err(|e| CliError::io(path, e)),
    }
}

/// Everything needed to repeat a run; passing the file back through
/// `--config` reproduces the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub spec: Value,
    pub outputs: Vec<PathBuf>,
    pub result: Value,
    /// What blew up, if anything did.
    pub divergence: Option<String>,
    pub jobs: usize,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifests serialize");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}
