//! Statistics of simulated and recorded balancing runs.

mod density;
mod ensemble;
pub mod export;
mod peaks;
mod report;
mod rms;
mod slopes;
mod spectrum;
mod stcc;

pub use density::{velocity_density_ratio, DensityRatio, RATIO_MIN_COUNT};
pub use ensemble::{
    ensemble_rms, peak_density, peak_series, pooled_channel, EnsembleRms, PeakDensity, PeakDensityConfig, PeakSeries,
    PooledChannel,
};
pub use peaks::{first_dominant_peak, PeakRule};
pub use report::{summarize, trial_report, GroupStats, Grouping, ReportConfig, SubjectAverage, TrialReport, TrialRow};
pub use rms::rms;
pub use slopes::{fit_two_regime_slopes, SlopeFit, MIN_IMPROVEMENT};
pub use spectrum::{power_spectrum, PowerSpectrum};
pub use stcc::{stcc, LagRange, StccResult};

use thiserror::Error;

use crate::sdde::SddeError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("series `{0}` is empty")]
    Empty(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("window [{start}, {end}] s is outside the series (duration {duration} s)")]
    WindowOutOfRange { start: f64, end: f64, duration: f64 },
    #[error("signal is constant inside the window")]
    ZeroVariance,
    #[error("the two distributions share no supported bin")]
    NoOverlap,
    #[error("no window produced a dominant peak")]
    NoPeaks,
    #[error(transparent)]
    Model(#[from] SddeError),
}
