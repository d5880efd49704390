use serde::{Deserialize, Serialize};

use super::{seed_averaged_lyapunov, LyapunovConfig, SeedAverage, StabilityError};
use crate::sdde::{ModelKind, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub lyapunov: LyapunovConfig,
    /// Noise realizations averaged per gain; seeds are `params.seed + k`.
    pub n_seeds: usize,
    pub max_iterations: usize,
    /// Absolute floor on the accepted exponent mismatch.
    pub lambda_tol: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub width_tol: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            lyapunov: LyapunovConfig::default(),
            n_seeds: 8,
            max_iterations: 40,
            lambda_tol: 1e-4,
            width_tol: 1e-3,
        }
    }
}

impl CalibrationConfig {
    pub fn seeds(&self, base: u64) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|k| base.wrapping_add(k)).collect()
    }
}

/// One evaluated gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub lambda1: Option<f64>,
    pub std_error: Option<f64>,
    /// Failure message when the point could not be estimated.
    pub error: Option<String>,
}

impl SweepRow {
    fn ok(beta: f64, avg: &SeedAverage) -> Self {
        Self { beta, lambda1: Some(avg.lambda1), std_error: Some(avg.std_error), error: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration {
    pub beta_star: f64,
    pub target: f64,
    /// Bracket supplied by the caller.
    pub bracket: [f64; 2],
    /// Bracket when the bisection stopped.
    pub final_bracket: [f64; 2],
    pub achieved: f64,
    pub achieved_std_error: f64,
    pub iterations: usize,
    pub evaluations: Vec<SweepRow>,
}

/// Bisects on the seed-averaged exponent until it lies within
/// `max(2 stderr, lambda_tol)` of `target` or the bracket is narrower than
/// `width_tol`. The same seeds are reused at every gain.
pub fn calibrate_beta(
    kind: ModelKind,
    params: &ModelParams,
    target: f64,
    bracket: [f64; 2],
    cfg: &CalibrationConfig,
) -> Result<BetaCalibration, StabilityError> {
    let [mut lo, mut hi] = bracket;
    if !(lo < hi) {
        return Err(StabilityError::InvalidInput(format!("bracket [{lo}, {hi}] is empty")));
    }
    if cfg.n_seeds == 0 {
        return Err(StabilityError::InvalidInput("n_seeds must be >= 1".into()));
    }
    let seeds = cfg.seeds(params.seed);
    let mut evaluations = Vec::new();
    let mut eval = |beta: f64| -> Result<SeedAverage, StabilityError> {
        let avg = seed_averaged_lyapunov(kind, &params.with_beta(beta), &cfg.lyapunov, &seeds)?;
        evaluations.push(SweepRow::ok(beta, &avg));
        Ok(avg)
    };

    let at_lo = eval(lo)?;
    let at_hi = eval(hi)?;
    let sign_lo = (at_lo.lambda1 - target).signum();
    if sign_lo == (at_hi.lambda1 - target).signum() {
        return Err(StabilityError::NoStraddle {
            lo,
            hi,
            lambda_lo: at_lo.lambda1,
            lambda_hi: at_hi.lambda1,
            target,
        });
    }

    for iteration in 1..=cfg.max_iterations {
        let mid = 0.5 * (lo + hi);
        let at_mid = eval(mid)?;
        let miss = at_mid.lambda1 - target;
        let tol = (2.0 * at_mid.std_error).max(cfg.lambda_tol);
        if miss.abs() < tol || hi - lo < cfg.width_tol {
            return Ok(BetaCalibration {
                beta_star: mid,
                target,
                bracket,
                final_bracket: [lo, hi],
                achieved: at_mid.lambda1,
                achieved_std_error: at_mid.std_error,
                iterations: iteration,
                evaluations,
            });
        }
        if miss.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(StabilityError::NotConverged { iterations: cfg.max_iterations })
}

/// Seed-averaged exponent on `n_points` evenly spaced gains. Points that fail
/// are recorded with their error and the sweep continues.
pub fn lyapunov_sweep(
    kind: ModelKind,
    params: &ModelParams,
    beta_range: [f64; 2],
    n_points: usize,
    cfg: &CalibrationConfig,
) -> Result<Vec<SweepRow>, StabilityError> {
    if n_points < 2 {
        return Err(StabilityError::InvalidInput("a sweep needs at least 2 points".into()));
    }
    let seeds = cfg.seeds(params.seed);
    let [lo, hi] = beta_range;
    Ok((0..n_points)
        .map(|i| {
            let beta = lo + (hi - lo) * i as f64 / (n_points - 1) as f64;
            match seed_averaged_lyapunov(kind, &params.with_beta(beta), &cfg.lyapunov, &seeds) {
                Ok(avg) => SweepRow::ok(beta, &avg),
                Err(e) => SweepRow { beta, lambda1: None, std_error: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}
