use num_complex::Complex64;

use super::StabilityError;
use crate::sdde::{ModelKind, ModelParams};

const SEED_GRID: usize = 32;
const MAX_NEWTON: usize = 100;

/// Real part of the rightmost root of the deterministic characteristic
/// function `l^2 + gamma l - alpha + beta exp(-l tau) = 0`.
///
/// Newton's method is started from a grid of complex guesses covering
/// `Re l in [-2 gamma, gamma]`, `Im l in [0, 4 pi / tau]`; converged roots are
/// pooled and the largest real part returned.
pub fn characteristic_root(gamma: f64, alpha: f64, beta: f64, tau: f64) -> Result<f64, StabilityError> {
    characteristic_roots(gamma, alpha, beta, tau)?
        .into_iter()
        .map(|z| z.re)
        .reduce(f64::max)
        .ok_or(StabilityError::NoRootFound)
}

/// Exponent of the noise-free linear model. In the coupled system the sum of
/// the two errors feels the full `alpha` and their difference feels none.
pub fn deterministic_exponent(kind: ModelKind, p: &ModelParams) -> Result<f64, StabilityError> {
    let tilt = characteristic_root(p.gamma, p.alpha, p.beta, p.tau)?;
    match kind {
        ModelKind::Single => Ok(tilt),
        ModelKind::Coupled => Ok(tilt.max(characteristic_root(p.gamma, 0.0, p.beta, p.tau)?)),
        ModelKind::Nonlinear => Err(StabilityError::Unsupported(kind)),
    }
}

/// Distinct roots reached from the seed grid, upper half plane only.
pub fn characteristic_roots(gamma: f64, alpha: f64, beta: f64, tau: f64) -> Result<Vec<Complex64>, StabilityError> {
    if ![gamma, alpha, beta, tau].iter().all(|v| v.is_finite()) || tau < 0.0 {
        return Err(StabilityError::InvalidInput("characteristic root needs finite coefficients and tau >= 0".into()));
    }
    let f = |z: Complex64| z * z + gamma * z - alpha + beta * (-z * tau).exp();
    let df = |z: Complex64| 2.0 * z + gamma - beta * tau * (-z * tau).exp();

    let re_lo = -2.0 * gamma.abs().max(1.0);
    let re_hi = gamma.abs().max(1.0);
    let im_hi = if tau > 0.0 { 4.0 * std::f64::consts::PI / tau } else { gamma.abs().max(1.0) };

    let mut roots: Vec<Complex64> = Vec::new();
    for i in 0..SEED_GRID {
        for j in 0..SEED_GRID {
            let re = re_lo + (re_hi - re_lo) * i as f64 / (SEED_GRID - 1) as f64;
            let im = im_hi * j as f64 / (SEED_GRID - 1) as f64;
            let Some(root) = newton(Complex64::new(re, im), f, df) else { continue };
            let root = if root.im < 0.0 { root.conj() } else { root };
            let scale = 1.0 + root.norm();
            if !roots.iter().any(|r| (r - root).norm() < 1e-8 * scale) {
                roots.push(root);
            }
        }
    }
    Ok(roots)
}

fn newton(
    mut z: Complex64,
    f: impl Fn(Complex64) -> Complex64,
    df: impl Fn(Complex64) -> Complex64,
) -> Option<Complex64> {
    for _ in 0..MAX_NEWTON {
        let d = df(z);
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let step = f(z) / d;
        if !step.is_finite() {
            return None;
        }
        z -= step;
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            let residual = f(z).norm();
            return (residual <= 1e-9 * (1.0 + z.norm_sqr())).then_some(z);
        }
    }
    None
}
