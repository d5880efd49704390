//! Records of the tracking experiment: session configuration, the screen
//! mapping, `.trial.jsonl` files and their replay into time series.

mod io;
mod replay;
mod screen;

pub use io::{load, persist, LoadedTrial, TrialError, TrialWriter, TRIAL_EXTENSION};
pub use replay::{replay, ReplayChannel};
pub use screen::ScreenMap;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sdde::{ModelKind, ModelParams, SddeError};
use crate::series::TimeSeries;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialMode {
    Single,
    Coupled,
}

impl TrialMode {
    pub fn subjects(self) -> usize {
        match self {
            TrialMode::Single => 1,
            TrialMode::Coupled => 2,
        }
    }

    pub fn kind(self) -> ModelKind {
        match self {
            TrialMode::Single => ModelKind::Single,
            TrialMode::Coupled => ModelKind::Coupled,
        }
    }
}

impl fmt::Display for TrialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialMode::Single => "single",
            TrialMode::Coupled => "coupled",
        })
    }
}

impl FromStr for TrialMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(TrialMode::Single),
            "coupled" => Ok(TrialMode::Coupled),
            other => Err(format!("unknown mode `{other}` (expected single or coupled)")),
        }
    }
}

/// Everything that determines a tracking session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub mode: TrialMode,
    pub gamma: f64,
    pub alpha: f64,
    /// Kept for the record; the subjects replace the feedback term.
    pub beta: f64,
    pub nu: f64,
    pub tau: f64,
    /// Internal integration step (s).
    pub dt: f64,
    /// Rod length, the tip separation on screen in coupled mode.
    pub rod_length: f64,
    /// Hz.
    pub tick_rate: f64,
    /// s.
    pub max_duration: f64,
    /// Model coordinates shown on screen.
    pub visible_range: [f64; 2],
    /// px.
    pub screen_width: u32,
    /// Whole seconds.
    pub countdown: u32,
    pub initial_tip: f64,
    /// Base positions at t = 0, one per subject.
    pub initial_bases: Vec<f64>,
}

impl SessionConfig {
    pub fn new(mode: TrialMode) -> Self {
        Self {
            mode,
            gamma: 50.0,
            alpha: 21.0,
            beta: 21.0,
            nu: 0.6,
            tau: 0.1,
            dt: 1e-3,
            rod_length: 1.0,
            tick_rate: 50.0,
            max_duration: 600.0,
            visible_range: [-3.0, 3.0],
            screen_width: 1200,
            countdown: 3,
            initial_tip: -0.5,
            initial_bases: match mode {
                TrialMode::Single => vec![-0.6],
                TrialMode::Coupled => vec![-0.6, 0.6],
            },
        }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            gamma: self.gamma,
            alpha: self.alpha,
            beta: self.beta,
            nu: self.nu,
            tau: self.tau,
            dt: self.dt,
            seed: 0,
        }
    }

    pub fn screen(&self) -> ScreenMap {
        ScreenMap { range: self.visible_range, width: self.screen_width }
    }

    /// Integration steps per tick.
    pub fn substeps(&self) -> usize {
        (1.0 / (self.tick_rate * self.dt)).round() as usize
    }

    /// Ticks in a session that runs to the time limit.
    pub fn max_ticks(&self) -> u64 {
        (self.max_duration * self.tick_rate).round() as u64
    }

    /// Displayed tip positions: one tip, or the rod ends `q_T ± l/2`.
    pub fn tip_lines(&self, tip: f64) -> Vec<f64> {
        match self.mode {
            TrialMode::Single => vec![tip],
            TrialMode::Coupled => vec![tip - 0.5 * self.rod_length, tip + 0.5 * self.rod_length],
        }
    }

    pub fn validate(&self) -> Result<(), SddeError> {
        let bad = |m: String| Err(SddeError::InvalidParams(m));
        self.params().validate()?;
        if !(self.tick_rate > 0.0 && self.tick_rate.is_finite()) {
            return bad(format!("tick rate must be positive, got {}", self.tick_rate));
        }
        let sub = 1.0 / (self.tick_rate * self.dt);
        if (sub - sub.round()).abs() > 1e-9 * sub || sub.round() < 1.0 {
            return bad(format!("tick interval must be a whole number of steps of {}", self.dt));
        }
        if !(self.max_duration > 0.0 && self.max_duration.is_finite()) {
            return bad(format!("max duration must be positive, got {}", self.max_duration));
        }
        let [lo, hi] = self.visible_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite() && (lo + hi).abs() <= 1e-12 * (hi - lo)) {
            return bad(format!("visible range [{lo}, {hi}] must be symmetric and nonempty"));
        }
        if self.screen_width < 2 {
            return bad(format!("screen width must be at least 2 px, got {}", self.screen_width));
        }
        if !(self.rod_length >= 0.0 && self.rod_length.is_finite()) {
            return bad(format!("rod length must be >= 0, got {}", self.rod_length));
        }
        if self.initial_bases.len() != self.mode.subjects() {
            return bad(format!(
                "{} mode needs {} initial base positions, got {}",
                self.mode,
                self.mode.subjects(),
                self.initial_bases.len()
            ));
        }
        if !self.initial_tip.is_finite() || self.initial_bases.iter().any(|b| !b.is_finite()) {
            return bad("initial positions must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationCause {
    Completed,
    OutOfRange,
    AbortedBySubject,
    ClientLost,
}

impl TerminationCause {
    /// Records ending this way carry a full, usable trial.
    pub fn is_analyzable(self) -> bool {
        matches!(self, TerminationCause::Completed | TerminationCause::OutOfRange)
    }
}

impl fmt::Display for TerminationCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationCause::Completed => "completed",
            TerminationCause::OutOfRange => "out-of-range",
            TerminationCause::AbortedBySubject => "aborted-by-subject",
            TerminationCause::ClientLost => "client-lost",
        })
    }
}

/// First line of a trial file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialHeader {
    pub format_version: u32,
    pub session: String,
    pub subjects: Vec<String>,
    pub config: SessionConfig,
}

/// State at one tick, before the tick's input is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickRow {
    pub tick: u64,
    pub t: f64,
    pub tip: f64,
    pub bases: Vec<f64>,
    /// Raw pointer position per subject.
    pub mouse_px: Vec<i32>,
    /// `tip - base` per subject.
    pub errors: Vec<f64>,
    pub tip_vel: f64,
    pub base_vels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEnd {
    pub cause: TerminationCause,
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub header: TrialHeader,
    pub rows: Vec<TickRow>,
    /// Missing when the file was cut short.
    pub end: Option<TrialEnd>,
}

impl TrialRecord {
    pub fn cause(&self) -> Option<TerminationCause> {
        self.end.as_ref().map(|e| e.cause)
    }

    pub fn duration(&self) -> f64 {
        self.rows.len() as f64 / self.header.config.tick_rate
    }

    /// Builds a record from tip and base position series sampled at the
    /// configured tick rate, as if subjects had produced them.
    pub fn from_series(
        session: impl Into<String>,
        subjects: Vec<String>,
        config: SessionConfig,
        tip: &TimeSeries,
        bases: &[TimeSeries],
        cause: TerminationCause,
    ) -> Result<TrialRecord, SddeError> {
        config.validate()?;
        let n = config.mode.subjects();
        let tick_dt = 1.0 / config.tick_rate;
        if bases.len() != n || subjects.len() != n {
            return Err(SddeError::InvalidParams(format!("{} mode needs {n} bases and subjects", config.mode)));
        }
        if std::iter::once(tip).chain(bases).any(|s| (s.dt - tick_dt).abs() > 1e-9 * tick_dt || s.len() != tip.len()) {
            return Err(SddeError::InvalidParams(format!(
                "series must share length and the tick interval {tick_dt} s"
            )));
        }
        let screen = config.screen();
        let tip_vel = tip.derivative("v");
        let base_vel: Vec<TimeSeries> = bases.iter().map(|b| b.derivative("v")).collect();
        let rows = (0..tip.len())
            .map(|k| TickRow {
                tick: k as u64,
                t: k as f64 / config.tick_rate,
                tip: tip.samples[k],
                bases: bases.iter().map(|b| b.samples[k]).collect(),
                mouse_px: bases.iter().map(|b| screen.model_to_px(b.samples[k])).collect(),
                errors: bases.iter().map(|b| tip.samples[k] - b.samples[k]).collect(),
                tip_vel: tip_vel.samples[k],
                base_vels: base_vel.iter().map(|v| v.samples[k]).collect(),
            })
            .collect::<Vec<_>>();
        let ticks = rows.len() as u64;
        Ok(TrialRecord {
            header: TrialHeader { format_version: FORMAT_VERSION, session: session.into(), subjects, config },
            rows,
            end: Some(TrialEnd { cause, ticks }),
        })
    }
}
