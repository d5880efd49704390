use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SddeError;

/// Coefficients of the balancing models plus integration settings.
///
/// All three models share the same coefficient names:
/// `x'' + gamma x' - alpha x + beta (1 + nu xi(t)) x(t - tau) = 0`
/// in relative form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Damping coefficient (1/s).
    pub gamma: f64,
    /// Instability coefficient (1/s^2).
    pub alpha: f64,
    /// Feedback gain (1/s^2).
    pub beta: f64,
    /// Strength of the parametric noise on the feedback gain.
    pub nu: f64,
    /// Feedback delay (s).
    pub tau: f64,
    /// Integration step (s).
    pub dt: f64,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            gamma: 50.0,
            alpha: 22.0,
            beta: 20.306,
            nu: 0.6,
            tau: 0.1,
            dt: 1e-3,
            seed: 0,
        }
    }
}

impl ModelParams {
    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    pub fn with_nu(self, nu: f64) -> Self {
        Self { nu, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Checks the invariants and returns the delay in integration steps.
    pub fn validate(&self) -> Result<usize, SddeError> {
        let finite = [self.gamma, self.alpha, self.beta, self.nu, self.tau, self.dt]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(SddeError::InvalidParams("coefficients must be finite".into()));
        }
        if self.gamma <= 0.0 {
            return Err(SddeError::InvalidParams(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.tau <= 0.0 || self.dt <= 0.0 {
            return Err(SddeError::InvalidParams(format!(
                "tau and dt must be > 0, got tau={} dt={}",
                self.tau, self.dt
            )));
        }
        if self.nu < 0.0 {
            return Err(SddeError::InvalidParams(format!("nu must be >= 0, got {}", self.nu)));
        }
        let ratio = self.tau / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(SddeError::InvalidParams(format!(
                "tau/dt = {ratio} is not an integer"
            )));
        }
        if steps < 10.0 {
            return Err(SddeError::InvalidParams(format!(
                "dt must be <= tau/10 (tau/dt = {steps})"
            )));
        }
        Ok(steps as usize)
    }

    /// Number of integration steps spanned by the delay. Assumes `validate` passed.
    pub fn delay_steps(&self) -> usize {
        (self.tau / self.dt).round() as usize
    }
}

/// Which of the three balancing models to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Linear single stick in absolute tip/base coordinates.
    Single,
    /// Two linear sticks whose tips share one rigid rod.
    Coupled,
    /// Single stick with the full `sin` restoring term.
    Nonlinear,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Single => "single",
            ModelKind::Coupled => "coupled",
            ModelKind::Nonlinear => "nonlinear",
        })
    }
}

impl FromStr for ModelKind {
    type Err = SddeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(ModelKind::Single),
            "coupled" => Ok(ModelKind::Coupled),
            "nonlinear" => Ok(ModelKind::Nonlinear),
            other => Err(SddeError::InvalidParams(format!("unknown model kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert_eq!(ModelParams::default().validate().unwrap(), 100);
    }

    #[test]
    fn rejects_fractional_delay() {
        let p = ModelParams { dt: 3e-3, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_coarse_step() {
        let p = ModelParams { dt: 0.05, ..Default::default() };
        assert!(p.validate().is_err());
        let p = ModelParams { dt: 0.01, ..Default::default() };
        assert_eq!(p.validate().unwrap(), 10);
    }

    #[test]
    fn rejects_bad_signs() {
        for p in [
            ModelParams { gamma: 0.0, ..Default::default() },
            ModelParams { tau: -0.1, ..Default::default() },
            ModelParams { nu: -0.1, ..Default::default() },
            ModelParams { beta: f64::NAN, ..Default::default() },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn kind_round_trips_through_str() {
        for k in [ModelKind::Single, ModelKind::Coupled, ModelKind::Nonlinear] {
            assert_eq!(k.to_string().parse::<ModelKind>().unwrap(), k);
        }
        assert!("double".parse::<ModelKind>().is_err());
    }
}
