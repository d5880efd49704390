use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StabilityError;
use crate::sdde::{
    CoupledInit, CoupledState, LinearBalancer, ModelKind, ModelParams, SddeError, SingleInit, SingleState,
    SystemState,
};

/// Which state vector the growth rate is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Balancing errors and their rates only.
    Headline,
    /// Also includes every sample of the delay history.
    WithHistory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    /// Integrated time (s).
    pub horizon: f64,
    /// Integration steps between renormalizations.
    pub renorm_every: usize,
    /// Equal-length segments used for the standard error.
    pub segments: usize,
    pub norm: NormKind,
    /// Leading fraction of the horizon integrated but not averaged, so the
    /// start-up transient does not bias the rate.
    pub burn_in: f64,
    /// Repeat the run at half the step to estimate the time-discretization
    /// error of the rate.
    pub step_halving: bool,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            horizon: 2e4,
            renorm_every: 1000,
            segments: 20,
            norm: NormKind::Headline,
            burn_in: 0.05,
            step_halving: false,
        }
    }
}

impl LyapunovConfig {
    pub fn with_horizon(self, horizon: f64) -> Self {
        Self { horizon, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Largest Lyapunov exponent (1/s).
    pub lambda1: f64,
    /// Standard error of the mean over segment growth rates.
    pub std_error: f64,
    /// Time actually integrated (s).
    pub horizon: f64,
    /// Time between renormalizations (s).
    pub renorm_interval: f64,
    pub segment_rates: Vec<f64>,
    /// `2 |lambda(dt) - lambda(dt/2)|`, the leading-order bias of the
    /// first-order scheme, when step halving was requested.
    pub discretization_error: Option<f64>,
}

/// Rates computed in floating point cannot be resolved below this (1/s).
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

impl LyapunovEstimate {
    /// Combined statistical, discretization and round-off uncertainty
    /// against the continuous-time exponent.
    pub fn uncertainty(&self) -> f64 {
        let d = self.discretization_error.unwrap_or(0.0);
        (self.std_error.powi(2) + d * d + ROUNDOFF_FLOOR * ROUNDOFF_FLOOR).sqrt()
    }
}

/// Largest Lyapunov exponent of the linear `kind` model.
///
/// The models are linear and homogeneous in the relative coordinates, so the
/// system itself is its own tangent system: it is started from a unit-norm
/// state and periodically scaled back to unit norm (history included), with
/// the logarithms of the scale factors accumulated per segment.
pub fn largest_lyapunov(kind: ModelKind, p: &ModelParams, cfg: &LyapunovConfig) -> Result<LyapunovEstimate, StabilityError> {
    let mut est = run(kind, p, cfg)?;
    if cfg.step_halving {
        let fine_p = ModelParams { dt: 0.5 * p.dt, ..*p };
        let fine_cfg = LyapunovConfig { renorm_every: 2 * cfg.renorm_every, step_halving: false, ..*cfg };
        let fine = run(kind, &fine_p, &fine_cfg)?;
        est.discretization_error = Some(2.0 * (est.lambda1 - fine.lambda1).abs());
    }
    Ok(est)
}

fn run(kind: ModelKind, p: &ModelParams, cfg: &LyapunovConfig) -> Result<LyapunovEstimate, StabilityError> {
    p.validate()?;
    match kind {
        ModelKind::Single => {
            let state = SingleState::new(p, SingleInit::at_rest(1.0))?;
            estimate(state, p, cfg)
        }
        ModelKind::Coupled => {
            // deliberately asymmetric start so both the sum and the difference mode are excited
            let init = CoupledInit { tip: 1.0, bases: [0.0, 1.0], ..Default::default() };
            let state = CoupledState::new(p, init)?;
            estimate(state, p, cfg)
        }
        ModelKind::Nonlinear => Err(StabilityError::Unsupported(kind)),
    }
}

fn estimate<S: LinearBalancer>(mut state: S, p: &ModelParams, cfg: &LyapunovConfig) -> Result<LyapunovEstimate, StabilityError> {
    let min_horizon = 100.0 * p.tau;
    if !(cfg.horizon >= min_horizon) {
        return Err(StabilityError::HorizonTooShort { horizon: cfg.horizon, min: min_horizon });
    }
    if cfg.segments < 2 || cfg.renorm_every == 0 {
        return Err(StabilityError::InvalidInput("need >= 2 segments and renorm_every >= 1".into()));
    }
    if !(0.0..0.5).contains(&cfg.burn_in) {
        return Err(StabilityError::InvalidInput(format!("burn-in fraction {} outside [0, 0.5)", cfg.burn_in)));
    }
    let burn = (cfg.burn_in * cfg.horizon / p.dt).round() as usize;
    let total = (cfg.horizon / p.dt).round() as usize - burn;
    let seg_len = total / cfg.segments;
    if seg_len == 0 {
        return Err(StabilityError::HorizonTooShort { horizon: cfg.horizon, min: cfg.segments as f64 * p.dt });
    }
    let norm = |s: &S| match cfg.norm {
        NormKind::Headline => s.headline_norm(),
        NormKind::WithHistory => s.full_norm(),
    };

    let n0 = norm(&state);
    state.rescale(1.0 / n0);
    let mut noise = SystemState::noise_streams(
        if S::NOISE_STREAMS == 2 { ModelKind::Coupled } else { ModelKind::Single },
        p.seed,
    );
    let diverged = |e| match e {
        SddeError::Diverged { t } => StabilityError::Diverged { t },
        other => other.into(),
    };
    for k in 1..=burn {
        state.step_streams(p, &mut noise).map_err(diverged)?;
        if k % cfg.renorm_every == 0 || k == burn {
            let n = norm(&state);
            if !(n > 0.0 && n.is_finite()) {
                return Err(StabilityError::Diverged { t: state.time() });
            }
            state.rescale(1.0 / n);
        }
    }
    let mut rates = Vec::with_capacity(cfg.segments);
    let mut log_growth = 0.0;
    for k in 1..=seg_len * cfg.segments {
        state.step_streams(p, &mut noise).map_err(diverged)?;
        let seg_end = k % seg_len == 0;
        if seg_end || k % cfg.renorm_every == 0 {
            let n = norm(&state);
            if !(n > 0.0 && n.is_finite()) {
                return Err(StabilityError::Diverged { t: state.time() });
            }
            log_growth += n.ln();
            state.rescale(1.0 / n);
        }
        if seg_end {
            rates.push(log_growth / (seg_len as f64 * p.dt));
            log_growth = 0.0;
        }
    }
    let (mean, se) = mean_and_std_error(&rates);
    Ok(LyapunovEstimate {
        lambda1: mean,
        std_error: se,
        horizon: (seg_len * cfg.segments) as f64 * p.dt,
        renorm_interval: cfg.renorm_every as f64 * p.dt,
        segment_rates: rates,
        discretization_error: None,
    })
}

/// Estimate averaged over independent noise realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAverage {
    pub lambda1: f64,
    /// Spread of the per-seed estimates over `sqrt(n)`; the segment standard
    /// error when only one seed is used.
    pub std_error: f64,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<f64>,
}

pub fn seed_averaged_lyapunov(
    kind: ModelKind,
    p: &ModelParams,
    cfg: &LyapunovConfig,
    seeds: &[u64],
) -> Result<SeedAverage, StabilityError> {
    if seeds.is_empty() {
        return Err(StabilityError::InvalidInput("at least one seed required".into()));
    }
    let estimates: Vec<LyapunovEstimate> = seeds
        .par_iter()
        .map(|&s| largest_lyapunov(kind, &p.with_seed(s), cfg))
        .collect::<Result<_, _>>()?;
    let per_seed: Vec<f64> = estimates.iter().map(|e| e.lambda1).collect();
    let (mean, mut se) = mean_and_std_error(&per_seed);
    if per_seed.len() == 1 {
        se = estimates[0].std_error;
    }
    Ok(SeedAverage { lambda1: mean, std_error: se, seeds: seeds.to_vec(), per_seed })
}

pub(crate) fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
