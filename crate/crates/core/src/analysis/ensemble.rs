use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stcc::{resolve_window, stcc_samples};
use super::{first_dominant_peak, rms, AnalysisError, LagRange, PeakRule, StccResult};
use crate::sdde::{simulate, Channel, ModelKind, ModelParams, SimRequest};
use crate::series::TimeSeries;

/// Balancing-error RMS over independent realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRms {
    pub kind: ModelKind,
    pub horizon: f64,
    pub seeds: Vec<u64>,
    /// `None` for realizations that diverged.
    pub rms: Vec<Option<f64>>,
    pub diverged: usize,
    /// Mean of log10 RMS over the surviving realizations.
    pub mean_log10: f64,
}

impl EnsembleRms {
    /// `10^mean_log10`.
    pub fn headline(&self) -> f64 {
        10f64.powf(self.mean_log10)
    }
}

/// Runs `n_real` realizations with seeds `params.seed + r` and reports the
/// RMS of the stick-1 balancing error of each.
pub fn ensemble_rms(
    kind: ModelKind,
    params: &ModelParams,
    horizon: f64,
    n_real: usize,
    downsample: usize,
) -> Result<EnsembleRms, AnalysisError> {
    if n_real < 2 {
        return Err(AnalysisError::InvalidInput("an ensemble needs at least two realizations".into()));
    }
    params.validate()?;
    let seeds: Vec<u64> = (0..n_real as u64).map(|r| params.seed.wrapping_add(r)).collect();
    let label = Channel::Error(1).label(kind);
    let rms: Vec<Option<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let req = SimRequest::new(kind, params.with_seed(seed), horizon)
                .channels(&[label.as_str()])
                .downsample(downsample);
            let out = simulate(&req)?;
            if out.diverged_at.is_some() {
                return Ok(None);
            }
            Ok(Some(rms(&out.series[0])?))
        })
        .collect::<Result<_, AnalysisError>>()?;
    let logs: Vec<f64> = rms.iter().flatten().filter(|r| **r > 0.0).map(|r| r.log10()).collect();
    if logs.is_empty() {
        return Err(AnalysisError::InvalidInput("every realization diverged".into()));
    }
    let mean_log10 = logs.iter().sum::<f64>() / logs.len() as f64;
    let diverged = rms.iter().filter(|r| r.is_none()).count();
    Ok(EnsembleRms { kind, horizon, seeds, rms, diverged, mean_log10 })
}

/// One channel concatenated over independent realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledChannel {
    pub series: TimeSeries,
    pub realizations: usize,
    /// Realizations left out because they blew up.
    pub diverged: usize,
}

/// Concatenates `label` over `n_real` runs with seeds `params.seed + r`, in
/// seed order. Diverged runs are dropped and counted.
pub fn pooled_channel(
    kind: ModelKind,
    params: &ModelParams,
    label: &str,
    horizon: f64,
    n_real: usize,
    downsample: usize,
) -> Result<PooledChannel, AnalysisError> {
    if n_real == 0 {
        return Err(AnalysisError::InvalidInput("need at least one realization".into()));
    }
    params.validate()?;
    Channel::parse(label, kind)?;
    let runs: Vec<Option<Vec<f64>>> = (0..n_real as u64)
        .into_par_iter()
        .map(|r| {
            let req = SimRequest::new(kind, params.with_seed(params.seed.wrapping_add(r)), horizon)
                .channels(&[label])
                .downsample(downsample);
            let mut out = simulate(&req)?;
            Ok(out.diverged_at.is_none().then(|| out.series.remove(0).samples))
        })
        .collect::<Result<_, AnalysisError>>()?;
    let diverged = runs.iter().filter(|r| r.is_none()).count();
    let samples: Vec<f64> = runs.into_iter().flatten().flatten().collect();
    Ok(PooledChannel {
        series: TimeSeries::new(label, params.dt * downsample as f64, samples),
        realizations: n_real,
        diverged,
    })
}

/// First-dominant-peak lag per sliding window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSeries {
    pub starts: Vec<f64>,
    pub peaks: Vec<Option<f64>>,
}

/// Slides `window`-long STCC windows by `hop` over the overlap of `x` and
/// `y` and applies `rule` to each.
pub fn peak_series(
    x: &TimeSeries,
    y: &TimeSeries,
    window: f64,
    hop: f64,
    rule: &PeakRule,
) -> Result<PeakSeries, AnalysisError> {
    if !(hop > 0.0) {
        return Err(AnalysisError::InvalidInput(format!("hop must be positive, got {hop}")));
    }
    let lags = peak_lags(rule, x.dt);
    let lag_grid: Vec<f64> = {
        let k = (lags.max / x.dt + 1e-9).floor() as i64;
        (0..=k).map(|i| i as f64 * x.dt).collect()
    };
    let mut out = PeakSeries { starts: vec![], peaks: vec![] };
    let mut n = 0u64;
    loop {
        let t = n as f64 * hop;
        let w = match resolve_window(x, y, t, window, lags) {
            Ok(w) => w,
            Err(AnalysisError::WindowOutOfRange { .. }) => break,
            Err(e) => return Err(e),
        };
        let peak = match stcc_samples(&x.samples, &y.samples, &w) {
            Ok(coefficients) => {
                let r = StccResult { lags: lag_grid.clone(), coefficients, t, window };
                first_dominant_peak(&r, rule)
            }
            Err(AnalysisError::ZeroVariance) => None,
            Err(e) => return Err(e),
        };
        out.starts.push(t);
        out.peaks.push(peak);
        n += 1;
    }
    Ok(out)
}

/// One sample past the search range so its last lag can be a local maximum.
fn peak_lags(rule: &PeakRule, dt: f64) -> LagRange {
    LagRange::nonnegative(rule.search[1] + dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakDensityConfig {
    pub n_real: usize,
    /// s.
    pub horizon: f64,
    /// STCC window length (s).
    pub window: f64,
    /// s.
    pub hop: f64,
    /// Integration steps per recorded velocity sample.
    pub downsample: usize,
    pub bin_width: f64,
    pub rule: PeakRule,
}

impl Default for PeakDensityConfig {
    fn default() -> Self {
        Self { n_real: 100, horizon: 1200.0, window: 5.0, hop: 1.0, downsample: 5, bin_width: 0.01, rule: PeakRule::default() }
    }
}

/// Normalized histogram of first-dominant-peak lags between tip and base
/// velocities. Both bases contribute in the coupled model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakDensity {
    pub kind: ModelKind,
    /// Left bin edges (s).
    pub edges: Vec<f64>,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    pub windows: u64,
    pub absent: u64,
    pub diverged: usize,
}

impl PeakDensity {
    /// (bin centre, density) of the tallest bin, ties to the shorter lag.
    pub fn mode(&self) -> (f64, f64) {
        let mut best = 0;
        for (i, d) in self.density.iter().enumerate() {
            if *d > self.density[best] {
                best = i;
            }
        }
        (self.edges[best] + 0.5 * self.bin_width, self.density[best])
    }

    /// Probability mass strictly below `lag`, counting whole bins.
    pub fn mass_below(&self, lag: f64) -> f64 {
        self.edges
            .iter()
            .zip(&self.density)
            .filter(|(e, _)| **e + self.bin_width <= lag + 1e-12)
            .map(|(_, d)| d * self.bin_width)
            .sum()
    }
}

pub fn peak_density(kind: ModelKind, params: &ModelParams, cfg: &PeakDensityConfig) -> Result<PeakDensity, AnalysisError> {
    if cfg.n_real < 2 {
        return Err(AnalysisError::InvalidInput("peak densities need at least two realizations".into()));
    }
    if kind == ModelKind::Nonlinear {
        return Err(AnalysisError::InvalidInput("the nonlinear model has no base velocity".into()));
    }
    if !(cfg.bin_width > 0.0) {
        return Err(AnalysisError::InvalidInput("bin width must be positive".into()));
    }
    params.validate()?;
    let bases: Vec<u8> = if kind == ModelKind::Coupled { vec![1, 2] } else { vec![1] };
    let mut labels = vec![Channel::TipVel.label(kind)];
    labels.extend(bases.iter().map(|&i| Channel::BaseVel(i).label(kind)));

    let per_real: Vec<Option<Vec<Option<f64>>>> = (0..cfg.n_real as u64)
        .into_par_iter()
        .map(|r| {
            let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let req = SimRequest::new(kind, params.with_seed(params.seed.wrapping_add(r)), cfg.horizon)
                .channels(&refs)
                .downsample(cfg.downsample);
            let out = simulate(&req)?;
            if out.diverged_at.is_some() {
                return Ok(None);
            }
            let mut peaks = Vec::new();
            for base in &out.series[1..] {
                peaks.extend(peak_series(&out.series[0], base, cfg.window, cfg.hop, &cfg.rule)?.peaks);
            }
            Ok(Some(peaks))
        })
        .collect::<Result<_, AnalysisError>>()?;

    let n_bins = ((cfg.rule.search[1] - cfg.rule.search[0]) / cfg.bin_width - 1e-9).ceil() as usize;
    let mut counts = vec![0u64; n_bins.max(1)];
    let (mut windows, mut absent, mut diverged) = (0u64, 0u64, 0usize);
    for peaks in &per_real {
        let Some(peaks) = peaks else {
            diverged += 1;
            continue;
        };
        for p in peaks {
            windows += 1;
            match p {
                Some(lag) => {
                    let k = (((lag - cfg.rule.search[0]) / cfg.bin_width + 1e-9).floor() as usize).min(counts.len() - 1);
                    counts[k] += 1;
                }
                None => absent += 1,
            }
        }
    }
    let found: u64 = counts.iter().sum();
    if found == 0 {
        return Err(AnalysisError::NoPeaks);
    }
    let density = counts.iter().map(|c| *c as f64 / (found as f64 * cfg.bin_width)).collect();
    let edges = (0..counts.len()).map(|k| cfg.rule.search[0] + k as f64 * cfg.bin_width).collect();
    Ok(PeakDensity { kind, edges, bin_width: cfg.bin_width, counts, density, windows, absent, diverged })
}
