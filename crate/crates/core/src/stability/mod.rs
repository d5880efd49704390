//! Largest Lyapunov exponents, gain calibration and the deterministic
//! characteristic-root oracle.

mod calibrate;
mod characteristic;
mod lyapunov;

pub use calibrate::{calibrate_beta, lyapunov_sweep, BetaCalibration, CalibrationConfig, SweepRow};
pub use characteristic::{characteristic_root, characteristic_roots, deterministic_exponent};
pub use lyapunov::{
    largest_lyapunov, seed_averaged_lyapunov, LyapunovConfig, LyapunovEstimate, NormKind, SeedAverage,
    ROUNDOFF_FLOOR,
};

use thiserror::Error;

use crate::sdde::{ModelKind, SddeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("horizon {horizon} s is shorter than the required {min} s")]
    HorizonTooShort { horizon: f64, min: f64 },
    #[error("state diverged between renormalizations at t = {t} s; renormalize more often")]
    Diverged { t: f64 },
    #[error("Lyapunov estimation is not available for the {0} model")]
    Unsupported(ModelKind),
    #[error("Newton iteration converged from none of the seeds")]
    NoRootFound,
    #[error("bracket [{lo}, {hi}] does not straddle the target: lambda1 = {lambda_lo} and {lambda_hi} vs {target}")]
    NoStraddle { lo: f64, hi: f64, lambda_lo: f64, lambda_hi: f64, target: f64 },
    #[error("calibration did not reach tolerance after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error(transparent)]
    Model(#[from] SddeError),
}
