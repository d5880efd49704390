use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{TickRow, TrialEnd, TrialHeader, TrialRecord, FORMAT_VERSION};

pub const TRIAL_EXTENSION: &str = "trial.jsonl";

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{path}: unsupported format version {found} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion { path: PathBuf, found: u32 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(TrialHeader),
    Tick(TickRow),
    End(TrialEnd),
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LineRef<'a> {
    Header(&'a TrialHeader),
    Tick(&'a TickRow),
    End(&'a TrialEnd),
}

/// Append-only writer; every line is flushed as soon as it is written.
pub struct TrialWriter {
    path: PathBuf,
    out: BufWriter<File>,
    ticks: u64,
}

impl TrialWriter {
    pub fn create(path: impl AsRef<Path>, header: &TrialHeader) -> Result<Self, TrialError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|source| TrialError::Io { path: path.clone(), source })?;
        let mut w = TrialWriter { path, out: BufWriter::new(file), ticks: 0 };
        w.line(&LineRef::Header(header))?;
        Ok(w)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn write_row(&mut self, row: &TickRow) -> Result<(), TrialError> {
        self.line(&LineRef::Tick(row))?;
        self.ticks += 1;
        Ok(())
    }

    pub fn finish(mut self, end: &TrialEnd) -> Result<PathBuf, TrialError> {
        self.line(&LineRef::End(end))?;
        Ok(self.path)
    }

    fn line(&mut self, line: &LineRef<'_>) -> Result<(), TrialError> {
        let io_err = |source| TrialError::Io { path: self.path.clone(), source };
        serde_json::to_writer(&mut self.out, line).map_err(|e| io_err(io::Error::other(e)))?;
        self.out.write_all(b"\n").map_err(io_err)?;
        self.out.flush().map_err(io_err)
    }
}

pub fn persist(record: &TrialRecord, path: impl AsRef<Path>) -> Result<(), TrialError> {
    let mut w = TrialWriter::create(path, &record.header)?;
    for row in &record.rows {
        w.write_row(row)?;
    }
    if let Some(end) = &record.end {
        w.finish(end)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTrial {
    pub record: TrialRecord,
    pub warnings: Vec<String>,
}

/// Reads a trial file. A damaged final line or a missing end marker keeps the
/// valid prefix and adds a warning; damage anywhere else is an error.
pub fn load(path: impl AsRef<Path>) -> Result<LoadedTrial, TrialError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TrialError::Io { path: path.into(), source })?;
    let malformed = |line: usize, message: String| TrialError::Malformed { path: path.into(), line, message };
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    let complete_tail = text.ends_with('\n');
    let mut warnings = Vec::new();
    let mut header = None;
    let mut rows: Vec<TickRow> = Vec::new();
    let mut end = None;

    for (i, raw) in lines.iter().enumerate() {
        let lineno = i + 1;
        let last = i + 1 == lines.len();
        if raw.trim().is_empty() {
            continue;
        }
        if end.is_some() {
            return Err(malformed(lineno, "content after the end marker".into()));
        }
        let parsed: Line = match serde_json::from_str(raw) {
            Ok(l) => l,
            Err(e) if last && !complete_tail && header.is_some() => {
                warnings.push(format!("line {lineno} is truncated ({e}); kept the first {} ticks", rows.len()));
                break;
            }
            Err(e) => return Err(malformed(lineno, e.to_string())),
        };
        match (parsed, header.is_some()) {
            (Line::Header(h), false) => {
                if h.format_version != FORMAT_VERSION {
                    return Err(TrialError::UnsupportedVersion { path: path.into(), found: h.format_version });
                }
                header = Some(h);
            }
            (_, false) => return Err(malformed(lineno, "first line must be the header".into())),
            (Line::Header(_), true) => return Err(malformed(lineno, "second header".into())),
            (Line::Tick(row), true) => {
                if row.tick != rows.len() as u64 {
                    return Err(malformed(lineno, format!("expected tick {}, found {}", rows.len(), row.tick)));
                }
                rows.push(row);
            }
            (Line::End(e), true) => {
                if e.ticks != rows.len() as u64 {
                    return Err(malformed(lineno, format!("end marker counts {} ticks, file has {}", e.ticks, rows.len())));
                }
                end = Some(e);
            }
        }
    }
    let header = header.ok_or_else(|| malformed(1, "missing header".into()))?;
    if end.is_none() {
        warnings.push(format!("no end marker; record stops after {} ticks", rows.len()));
    }
    Ok(LoadedTrial { record: TrialRecord { header, rows, end }, warnings })
}
