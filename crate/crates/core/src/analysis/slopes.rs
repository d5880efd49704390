use serde::{Deserialize, Serialize};

use super::{AnalysisError, PowerSpectrum};

/// Relative residual drop below which a breakpoint is not worth it.
pub const MIN_IMPROVEMENT: f64 = 0.05;

/// Breakpoint candidates per decade.
const BINS_PER_DECADE: f64 = 20.0;
const MIN_POINTS_PER_SIDE: usize = 3;

/// Broken power-law fit in log10-log10 coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope_low: f64,
    pub slope_high: f64,
    pub intercept_low: f64,
    pub intercept_high: f64,
    /// Hz.
    pub breakpoint: f64,
    /// Sums of squared log10 residuals.
    pub residual_low: f64,
    pub residual_high: f64,
    pub single_slope: f64,
    pub single_residual: f64,
    /// `1 - (residual_low + residual_high) / single_residual`.
    pub improvement: f64,
    pub second_regime: bool,
    pub band: [f64; 2],
    pub points: usize,
}

#[derive(Debug, Clone, Copy)]
struct Line {
    slope: f64,
    intercept: f64,
    ssr: f64,
}

fn fit_line(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Line { slope, intercept, ssr }
}

/// Positive raw bins inside `band`, in log10 coordinates.
fn log_points(spectrum: &PowerSpectrum, band: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
    spectrum
        .frequencies
        .iter()
        .zip(&spectrum.power)
        .filter(|(f, p)| **f >= band[0] && **f <= band[1] && **p > 0.0 && p.is_finite())
        .map(|(f, p)| (f.log10(), p.log10()))
        .unzip()
}

/// Scans breakpoints on a log-spaced grid inside `band` and fits one
/// least-squares line per side to the log-log spectrum.
pub fn fit_two_regime_slopes(spectrum: &PowerSpectrum, band: [f64; 2]) -> Result<SlopeFit, AnalysisError> {
    if !(band[0] > 0.0 && band[1].is_finite()) || band[1] / band[0] < 100.0 * (1.0 - 1e-12) {
        return Err(AnalysisError::InvalidInput(format!(
            "band [{}, {}] Hz must span at least two decades",
            band[0], band[1]
        )));
    }
    let (x, y) = log_points(spectrum, band);
    if x.len() < 2 * MIN_POINTS_PER_SIDE {
        return Err(AnalysisError::InvalidInput(format!("only {} positive frequency bins in the band", x.len())));
    }
    let single = fit_line(&x, &y);
    let (lo, hi) = (band[0].log10(), band[1].log10());
    let cells = ((hi - lo) * BINS_PER_DECADE).round() as usize;
    let mut best: Option<(f64, Line, Line)> = None;
    for c in 1..cells {
        let edge = lo + c as f64 / BINS_PER_DECADE;
        let split = x.partition_point(|v| *v < edge);
        if split < MIN_POINTS_PER_SIDE || x.len() - split < MIN_POINTS_PER_SIDE {
            continue;
        }
        let low = fit_line(&x[..split], &y[..split]);
        let high = fit_line(&x[split..], &y[split..]);
        if best.as_ref().map_or(true, |(_, l, h)| low.ssr + high.ssr < l.ssr + h.ssr) {
            best = Some((edge, low, high));
        }
    }
    let (edge, low, high) = best.ok_or_else(|| {
        AnalysisError::InvalidInput("no breakpoint leaves enough bins on both sides".into())
    })?;
    let improvement = if single.ssr > 1e-20 * x.len() as f64 { 1.0 - (low.ssr + high.ssr) / single.ssr } else { 0.0 };
    Ok(SlopeFit {
        slope_low: low.slope,
        slope_high: high.slope,
        intercept_low: low.intercept,
        intercept_high: high.intercept,
        breakpoint: 10f64.powf(edge),
        residual_low: low.ssr,
        residual_high: high.ssr,
        single_slope: single.slope,
        single_residual: single.ssr,
        improvement,
        second_regime: improvement >= MIN_IMPROVEMENT,
        band,
        points: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::power_spectrum;
    use crate::sdde::NoiseStream;
    use crate::series::TimeSeries;

    fn synthetic(f0: f64, lo_exp: f64, hi_exp: f64) -> PowerSpectrum {
        let frequencies: Vec<f64> = (0..20000).map(|k| k as f64 * 0.005).collect();
        let power = frequencies
            .iter()
            .map(|&f| if f < f0 { f.powf(lo_exp) } else { f0.powf(lo_exp - hi_exp) * f.powf(hi_exp) })
            .collect();
        PowerSpectrum { frequencies, power, segment_len: 40000, overlap: 0.5, segments: 1 }
    }

    #[test]
    fn recovers_synthetic_broken_power_law() {
        let sp = synthetic(1.0, -0.5, -2.0);
        let fit = fit_two_regime_slopes(&sp, [0.01, 50.0]).unwrap();
        assert!((fit.slope_low + 0.5).abs() < 0.05, "{fit:?}");
        assert!((fit.slope_high + 2.0).abs() < 0.05, "{fit:?}");
        let cell = 1.0 / BINS_PER_DECADE;
        assert!((fit.breakpoint.log10() - 0.0).abs() <= cell, "{}", fit.breakpoint);
        assert!(fit.second_regime);
        assert!(fit.breakpoint > 0.01 && fit.breakpoint < 50.0);
    }

    #[test]
    fn exact_single_power_law_has_no_second_regime() {
        let sp = synthetic(1e9, -1.0, -1.0);
        let fit = fit_two_regime_slopes(&sp, [0.01, 50.0]).unwrap();
        assert!((fit.single_slope + 1.0).abs() < 1e-9);
        assert!(!fit.second_regime);
    }

    #[test]
    fn white_noise_is_flat_without_second_regime() {
        let mut g = NoiseStream::new(11, 0);
        let n = 512 * 101;
        let s = TimeSeries::new("w", 0.01, (0..n).map(|_| g.next_gaussian()).collect());
        let sp = power_spectrum(&s, 1024, 0.5).unwrap();
        assert!(sp.segments >= 100);
        let fit = fit_two_regime_slopes(&sp, [0.4, 40.0]).unwrap();
        assert!(fit.single_slope.abs() < 0.1, "{fit:?}");
        assert!(!fit.second_regime, "{fit:?}");
    }

    #[test]
    fn scale_invariant() {
        let sp = synthetic(1.0, -0.5, -2.0);
        let mut scaled = sp.clone();
        scaled.power.iter_mut().for_each(|p| *p *= 7.0e4);
        let a = fit_two_regime_slopes(&sp, [0.01, 50.0]).unwrap();
        let b = fit_two_regime_slopes(&scaled, [0.01, 50.0]).unwrap();
        assert!((a.slope_low - b.slope_low).abs() < 1e-9);
        assert!((a.slope_high - b.slope_high).abs() < 1e-9);
        assert_eq!(a.breakpoint, b.breakpoint);
    }

    #[test]
    fn narrow_band_rejected() {
        let sp = synthetic(1.0, -0.5, -2.0);
        assert!(fit_two_regime_slopes(&sp, [0.1, 5.0]).is_err());
    }
}
