//! Euler–Maruyama integration of the balancing models with delayed,
//! randomly modulated feedback.
//!
//! The white noise on the feedback gain is discretized in the Itô sense:
//! over one step the gain `beta (1 + nu xi)` contributes
//! `beta * delayed * dt + beta * nu * delayed * sqrt(dt) * N(0, 1)` to the
//! base velocity.

mod coupled;
mod delay;
mod noise;
mod nonlinear;
mod params;
mod simulate;
mod single;

pub use coupled::{CoupledInit, CoupledState};
pub use delay::DelayBuffer;
pub use noise::NoiseStream;
pub use nonlinear::{NonlinearInit, NonlinearState};
pub use params::{ModelKind, ModelParams};
pub use simulate::{simulate, Channel, SimOutput, SimRequest, SystemState, DEFAULT_INITIAL_ERROR};
pub use single::{SingleInit, SingleState};

use thiserror::Error;

/// Any state component beyond this magnitude ends the run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SddeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),
    #[error("state diverged at t = {t} s")]
    Diverged { t: f64 },
}

/// Operations shared by the linear steppers, used by the Lyapunov estimator.
pub trait LinearBalancer: Clone {
    /// Independent noise streams consumed per step.
    const NOISE_STREAMS: usize;

    fn step_streams(&mut self, p: &ModelParams, noise: &mut [NoiseStream]) -> Result<(), SddeError>;

    /// Euclidean norm of the balancing errors and their rates.
    fn headline_norm(&self) -> f64;

    /// Norm including the stored delay history.
    fn full_norm(&self) -> f64;

    /// Multiplies every relative quantity by `factor` and re-centres the
    /// absolute positions. The translation leaves the relative dynamics
    /// untouched and keeps positions from drifting away from the errors.
    fn rescale(&mut self, factor: f64);

    fn time(&self) -> f64;
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64, SddeError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SddeError::NonFinite(what))
    }
}

#[inline]
pub(crate) fn guard(values: &[f64], t: f64) -> Result<(), SddeError> {
    // NaN fails the comparison, so it is caught too
    if values.iter().all(|v| v.abs() <= DIVERGENCE_LIMIT) {
        Ok(())
    } else {
        Err(SddeError::Diverged { t })
    }
}
