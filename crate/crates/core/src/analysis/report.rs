use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ensemble::peak_series;
use super::{rms, AnalysisError, PeakRule};
use crate::trial::{replay, ReplayChannel, TrialMode, TrialRecord};

/// How trial rows are pooled for the (mean, std) summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    #[default]
    Global,
    Mode,
    Subject,
    SubjectMode,
}

impl std::str::FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" | "global" => Ok(Grouping::Global),
            "mode" => Ok(Grouping::Mode),
            "subject" => Ok(Grouping::Subject),
            "subject-mode" => Ok(Grouping::SubjectMode),
            other => Err(format!("unknown grouping `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    /// STCC window (s).
    pub window: f64,
    /// s.
    pub hop: f64,
    pub rule: PeakRule,
    pub grouping: Grouping,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { window: 5.0, hop: 1.0, rule: PeakRule::default(), grouping: Grouping::Global }
    }
}

/// One subject in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: String,
    pub subject: String,
    pub mode: TrialMode,
    pub stick: u8,
    /// Most frequent first-dominant-peak lag over the windows, ties to the
    /// shorter lag; `None` when no window had a peak.
    pub tau_hat: Option<f64>,
    pub rms: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectAverage {
    pub subject: String,
    pub mode: TrialMode,
    pub trials: usize,
    pub tau_hat: Option<f64>,
    pub rms: f64,
}

/// Mean and sample standard deviation of a group of trial rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: String,
    pub trials: usize,
    pub tau_mean: Option<f64>,
    pub tau_std: Option<f64>,
    pub rms_mean: f64,
    pub rms_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub rows: Vec<TrialRow>,
    pub subjects: Vec<SubjectAverage>,
    pub groups: Vec<GroupStats>,
    /// (trial, reason) for records left out.
    pub excluded: Vec<(String, String)>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn sample_std(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    (v.len() >= 2).then(|| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Lag that occurs most often, smallest first on ties.
fn modal_lag(peaks: &[Option<f64>], dt: f64) -> Option<f64> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for p in peaks.iter().flatten() {
        *counts.entry((p / dt).round() as i64).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts.iter().find(|(_, c)| **c == best).map(|(k, _)| *k as f64 * dt)
}

fn analyze(name: &str, record: &TrialRecord, cfg: &ReportConfig) -> Result<Vec<TrialRow>, AnalysisError> {
    let n = record.header.config.mode.subjects();
    let mut out = Vec::with_capacity(n);
    for i in 1..=n as u8 {
        let series = replay(record, &[ReplayChannel::TipVel, ReplayChannel::BaseVel(i), ReplayChannel::Error(i)])
            .map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
        let peaks = peak_series(&series[0], &series[1], cfg.window, cfg.hop, &cfg.rule)?;
        out.push(TrialRow {
            trial: name.to_string(),
            subject: record.header.subjects.get(i as usize - 1).cloned().unwrap_or_else(|| format!("subject{i}")),
            mode: record.header.config.mode,
            stick: i,
            tau_hat: modal_lag(&peaks.peaks, series[0].dt),
            rms: rms(&series[2])?,
            duration: record.duration(),
        });
    }
    Ok(out)
}

/// Per-subject averages and group statistics of already computed rows.
pub fn summarize(rows: &[TrialRow], grouping: Grouping) -> (Vec<SubjectAverage>, Vec<GroupStats>) {
    let mut by_subject: BTreeMap<(String, TrialMode), Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        by_subject.entry((r.subject.clone(), r.mode)).or_default().push(r);
    }
    let subjects = by_subject
        .into_iter()
        .map(|((subject, mode), rs)| {
            let taus: Vec<f64> = rs.iter().filter_map(|r| r.tau_hat).collect();
            let rmss: Vec<f64> = rs.iter().map(|r| r.rms).collect();
            SubjectAverage { subject, mode, trials: rs.len(), tau_hat: mean(&taus), rms: mean(&rmss).unwrap_or(f64::NAN) }
        })
        .collect();

    let mut by_group: BTreeMap<String, Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        let key = match grouping {
            Grouping::Global => "all".to_string(),
            Grouping::Mode => r.mode.to_string(),
            Grouping::Subject => r.subject.clone(),
            Grouping::SubjectMode => format!("{}/{}", r.subject, r.mode),
        };
        by_group.entry(key).or_default().push(r);
    }
    let groups = by_group
        .into_iter()
        .map(|(group, rs)| {
            let taus: Vec<f64> = rs.iter().filter_map(|r| r.tau_hat).collect();
            let rmss: Vec<f64> = rs.iter().map(|r| r.rms).collect();
            GroupStats {
                group,
                trials: rs.len(),
                tau_mean: mean(&taus),
                tau_std: sample_std(&taus),
                rms_mean: mean(&rmss).unwrap_or(f64::NAN),
                rms_std: sample_std(&rmss),
            }
        })
        .collect();
    (subjects, groups)
}

/// Correlation time and error RMS of every subject in every record.
/// Records that ended abnormally or hold less than two windows of data are
/// listed in `excluded`.
pub fn trial_report(records: &[(String, TrialRecord)], cfg: &ReportConfig) -> TrialReport {
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (name, record) in records {
        match record.cause() {
            Some(c) if c.is_analyzable() => {}
            Some(c) => {
                excluded.push((name.clone(), format!("terminated as {c}")));
                continue;
            }
            None => {
                excluded.push((name.clone(), "no end marker".into()));
                continue;
            }
        }
        if record.duration() < 2.0 * cfg.window {
            excluded.push((name.clone(), format!("only {:.2} s of data, need {} s", record.duration(), 2.0 * cfg.window)));
            continue;
        }
        match analyze(name, record, cfg) {
            Ok(r) => rows.extend(r),
            Err(e) => excluded.push((name.clone(), e.to_string())),
        }
    }
    let (subjects, groups) = summarize(&rows, cfg.grouping);
    TrialReport { rows, subjects, groups, excluded }
}
