use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::series::TimeSeries;

/// Lags probed by [`stcc`]: `0..=max` or `-max..=max` on the sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagRange {
    /// s.
    pub max: f64,
    pub symmetric: bool,
}

impl LagRange {
    pub fn nonnegative(max: f64) -> Self {
        Self { max, symmetric: false }
    }

    pub fn symmetric(max: f64) -> Self {
        Self { max, symmetric: true }
    }

    fn steps(&self, dt: f64) -> (i64, i64) {
        let k = (self.max / dt + 1e-9).floor() as i64;
        (if self.symmetric { -k } else { 0 }, k)
    }
}

/// Windowed correlation coefficient per lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StccResult {
    /// s.
    pub lags: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// Window start (s).
    pub t: f64,
    /// Window length (s).
    pub window: f64,
}

impl StccResult {
    /// Lag of the largest coefficient, ties to the smaller lag.
    pub fn argmax(&self) -> f64 {
        let mut best = 0;
        for (i, c) in self.coefficients.iter().enumerate() {
            if *c > self.coefficients[best] {
                best = i;
            }
        }
        self.lags[best]
    }
}

pub(crate) struct Window {
    pub start: usize,
    pub len: usize,
    pub lo: i64,
    pub hi: i64,
}

pub(crate) fn resolve_window(
    x: &TimeSeries,
    y: &TimeSeries,
    t: f64,
    window: f64,
    lags: LagRange,
) -> Result<Window, AnalysisError> {
    if (x.dt - y.dt).abs() > 1e-12 * x.dt {
        return Err(AnalysisError::InvalidInput(format!(
            "sample intervals differ: {} vs {}",
            x.dt, y.dt
        )));
    }
    if !(t >= 0.0 && window > 0.0 && lags.max >= 0.0) {
        return Err(AnalysisError::InvalidInput(format!("bad window t={t}, length={window}, max lag={}", lags.max)));
    }
    let dt = x.dt;
    let start = (t / dt).round() as usize;
    let len = (window / dt).round() as usize;
    let (lo, hi) = lags.steps(dt);
    let end_needed = start as i64 + len as i64 + hi;
    let avail = x.len().min(y.len()) as i64;
    if len < 2 || (start as i64) + lo < 0 || end_needed > avail || (start + len) as i64 > avail {
        return Err(AnalysisError::WindowOutOfRange {
            start: t + lo as f64 * dt,
            end: t + window + hi as f64 * dt,
            duration: avail as f64 * dt,
        });
    }
    Ok(Window { start, len, lo, hi })
}

/// Correlation of `x` over `[t, t + window]` with `y` shifted by each lag:
/// `R(tau) = mean((x(s) - m_x)(y(s + tau) - m_y)) / (s_x s_y)`, where the
/// `y` statistics are taken over the same shifted window so every
/// coefficient is a Pearson correlation.
pub fn stcc(x: &TimeSeries, y: &TimeSeries, t: f64, window: f64, lags: LagRange) -> Result<StccResult, AnalysisError> {
    let w = resolve_window(x, y, t, window, lags)?;
    let coefficients = stcc_samples(&x.samples, &y.samples, &w)?;
    let lags = (w.lo..=w.hi).map(|k| k as f64 * x.dt).collect();
    Ok(StccResult { lags, coefficients, t: w.start as f64 * x.dt, window: w.len as f64 * x.dt })
}

pub(crate) fn stcc_samples(x: &[f64], y: &[f64], w: &Window) -> Result<Vec<f64>, AnalysisError> {
    let n = w.len as f64;
    let xs = &x[w.start..w.start + w.len];
    let mx = xs.iter().sum::<f64>() / n;
    let xc: Vec<f64> = xs.iter().map(|v| v - mx).collect();
    let sx = (xc.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    if sx == 0.0 || !sx.is_finite() {
        return Err(AnalysisError::ZeroVariance);
    }

    // prefix sums over the y span, offset by its mean for accuracy
    let span_lo = (w.start as i64 + w.lo) as usize;
    let span_hi = (w.start as i64 + w.hi) as usize + w.len;
    let ys = &y[span_lo..span_hi];
    let shift = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut s1 = Vec::with_capacity(ys.len() + 1);
    let mut s2 = Vec::with_capacity(ys.len() + 1);
    s1.push(0.0);
    s2.push(0.0);
    for v in ys {
        let d = v - shift;
        s1.push(s1.last().unwrap() + d);
        s2.push(s2.last().unwrap() + d * d);
    }

    let mut out = Vec::with_capacity((w.hi - w.lo + 1) as usize);
    for k in w.lo..=w.hi {
        let off = (k - w.lo) as usize;
        let seg = &ys[off..off + w.len];
        let my = (s1[off + w.len] - s1[off]) / n;
        let var = ((s2[off + w.len] - s2[off]) / n - my * my).max(0.0);
        let sy = var.sqrt();
        if sy <= 1e-14 * (shift.abs() + my.abs()) || sy == 0.0 {
            return Err(AnalysisError::ZeroVariance);
        }
        let c: f64 = xc.iter().zip(seg).map(|(a, b)| a * b).sum::<f64>() / n;
        out.push((c / (sx * sy)).clamp(-1.0, 1.0));
    }
    Ok(out)
}
