//! One spec per subcommand and the computation behind it.

use std::path::{Path, PathBuf};

use balance_core::analysis::export::{GroupRows, SeriesTable, SubjectRows, TrialRows};
use balance_core::analysis::{
    ensemble_rms, first_dominant_peak, fit_two_regime_slopes, peak_density, peak_series, pooled_channel,
    power_spectrum, stcc, trial_report, velocity_density_ratio, DensityRatio, EnsembleRms, Grouping, LagRange,
    PeakDensity, PeakDensityConfig, PeakRule, PeakSeries, PowerSpectrum, ReportConfig, SlopeFit, StccResult,
    TrialReport,
};
use balance_core::sdde::{simulate, Channel, SimRequest, DEFAULT_INITIAL_ERROR};
use balance_core::stability::{
    calibrate_beta, deterministic_exponent, largest_lyapunov, lyapunov_sweep, BetaCalibration, CalibrationConfig,
    LyapunovConfig, LyapunovEstimate, SweepRow,
};
use balance_core::trial::{load, TrialRecord, TRIAL_EXTENSION};
use balance_core::{ModelKind, ModelParams, TimeSeries};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::output::{write_table, Format, Manifest, Table};
use crate::resolve::Spec;
use crate::CliError;

/// Gains at which the exponent sits at 5e-4 in the reference runs; used
/// when no `beta` is given.
pub fn reference_beta(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::Coupled => 21.032,
        ModelKind::Single | ModelKind::Nonlinear => 20.306,
    }
}

/// Model coefficients shared by every numerical subcommand; the gain is
/// given per command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub gamma: f64,
    pub alpha: f64,
    pub nu: f64,
    pub tau: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let p = ModelParams::default();
        Self { gamma: p.gamma, alpha: p.alpha, nu: p.nu, tau: p.tau, dt: p.dt, seed: p.seed }
    }
}

impl ModelSpec {
    pub fn params(&self, beta: f64) -> ModelParams {
        ModelParams { gamma: self.gamma, alpha: self.alpha, beta, nu: self.nu, tau: self.tau, dt: self.dt, seed: self.seed }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Validation(msg()))
    }
}

fn finish_model(kind: ModelKind, model: &ModelSpec, beta: &mut Option<f64>) -> Result<ModelParams, CliError> {
    let b = *beta.get_or_insert(reference_beta(kind));
    let p = model.params(b);
    p.validate()?;
    Ok(p)
}

fn require_linear(kind: ModelKind) -> Result<(), CliError> {
    check(kind != ModelKind::Nonlinear, || format!("the {kind} model is not supported by this command"))
}

/// Tables and headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// File-name suffix and table.
    pub tables: Vec<(&'static str, Table)>,
    pub result: Value,
    pub divergence: Option<String>,
}

pub trait Command: Spec {
    fn stem(&self) -> String;
    fn format(&self) -> Format;
    fn run(&self) -> Result<Outcome, CliError>;
}

/// Where and how a run writes.
#[derive(Debug, Clone)]
pub struct Target {
    pub dir: PathBuf,
    /// File stem; defaults to the command's own.
    pub name: Option<String>,
    pub allow_divergence: bool,
    pub jobs: usize,
}

/// Runs `spec`, writes its tables and manifest, and fails with a divergence
/// error afterwards unless divergence is allowed.
pub fn execute<C: Command>(spec: &C, target: &Target) -> Result<Manifest, CliError> {
    let outcome = spec.run()?;
    std::fs::create_dir_all(&target.dir).map_err(|e| CliError::io(&target.dir, e))?;
    let stem = target.name.clone().unwrap_or_else(|| spec.stem());
    let format = spec.format();
    let mut outputs = Vec::new();
    for (suffix, table) in &outcome.tables {
        let file = format!("{stem}{suffix}.{}", format.extension());
        write_table(&target.dir.join(&file), table, format)?;
        outputs.push(PathBuf::from(file));
    }
    let manifest = Manifest {
        command: C::COMMAND.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: serde_json::to_value(spec).expect("specs serialize"),
        outputs,
        result: outcome.result,
        divergence: outcome.divergence.clone(),
        jobs: target.jobs,
    };
    manifest.write(&target.dir.join(format!("{stem}.manifest.json")))?;
    match outcome.divergence {
        Some(d) if !target.allow_divergence => {
            Err(CliError::Divergence(format!("{d}; outputs were written, pass --allow-divergence to accept")))
        }
        _ => Ok(manifest),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSpec {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub model: ModelSpec,
    pub beta: Option<f64>,
    /// s.
    pub horizon: f64,
    /// Empty means the stick-1 balancing error.
    pub channels: Vec<String>,
    pub downsample: usize,
    pub initial_error: f64,
    pub format: Format,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Single,
            model: ModelSpec::default(),
            beta: None,
            horizon: 100.0,
            channels: Vec::new(),
            downsample: 10,
            initial_error: DEFAULT_INITIAL_ERROR,
            format: Format::Csv,
        }
    }
}

impl SimulateSpec {
    pub fn request(&self) -> SimRequest {
        let labels: Vec<&str> = self.channels.iter().map(String::as_str).collect();
        SimRequest {
            initial_error: self.initial_error,
            ..SimRequest::new(self.kind, self.model.params(self.beta.unwrap_or(reference_beta(self.kind))), self.horizon)
                .channels(&labels)
                .downsample(self.downsample)
        }
    }
}

impl Spec for SimulateSpec {
    const COMMAND: &'static str = "simulate";

    fn finish(&mut self) -> Result<(), CliError> {
        finish_model(self.kind, &self.model, &mut self.beta)?;
        if self.channels.is_empty() {
            self.channels.push(Channel::Error(1).label(self.kind));
        }
        for c in &self.channels {
            Channel::parse(c, self.kind)?;
        }
        check(self.horizon >= 0.0 && self.horizon.is_finite(), || format!("horizon must be >= 0, got {}", self.horizon))?;
        check(self.downsample >= 1, || "downsample must be >= 1".into())?;
        check(self.initial_error.is_finite(), || "initial_error must be finite".into())
    }
}

impl Command for SimulateSpec {
    fn stem(&self) -> String {
        format!("simulate-{}", self.kind)
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let out = simulate(&self.request())?;
        Ok(Outcome {
            tables: vec![("", Table::of(&SeriesTable(&out.series)))],
            result: json!({ "samples": out.series.first().map_or(0, TimeSeries::len), "diverged_at": out.diverged_at }),
            divergence: out.diverged_at.map(|t| format!("run diverged at t = {t} s")),
        })
    }
}

// ---------------------------------------------------------------- lyapunov

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpec {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub model: ModelSpec,
    pub beta: Option<f64>,
    #[serde(flatten)]
    pub lyapunov: LyapunovConfig,
    /// Realizations, seeds `seed + k`.
    pub n_seeds: usize,
    pub format: Format,
}

impl Default for LyapunovSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Single,
            model: ModelSpec::default(),
            beta: None,
            lyapunov: LyapunovConfig::default(),
            n_seeds: 1,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovRun {
    pub seeds: Vec<u64>,
    pub estimates: Vec<LyapunovEstimate>,
    pub lambda1: f64,
    /// Spread over seeds, or the segment error for a single seed.
    pub std_error: f64,
    /// Largest characteristic root, for noise-free runs.
    pub oracle: Option<f64>,
}

pub fn lyapunov(spec: &LyapunovSpec) -> Result<LyapunovRun, CliError> {
    let p = spec.model.params(spec.beta.unwrap_or(reference_beta(spec.kind)));
    let seeds: Vec<u64> = (0..spec.n_seeds as u64).map(|k| p.seed.wrapping_add(k)).collect();
    let estimates: Vec<LyapunovEstimate> = seeds
        .par_iter()
        .map(|&s| largest_lyapunov(spec.kind, &p.with_seed(s), &spec.lyapunov))
        .collect::<Result<_, _>>()?;
    let n = estimates.len() as f64;
    let lambda1 = estimates.iter().map(|e| e.lambda1).sum::<f64>() / n;
    let std_error = if estimates.len() == 1 {
        estimates[0].std_error
    } else {
        (estimates.iter().map(|e| (e.lambda1 - lambda1).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    };
    let oracle = if p.nu == 0.0 { Some(deterministic_exponent(spec.kind, &p)?) } else { None };
    Ok(LyapunovRun { seeds, estimates, lambda1, std_error, oracle })
}

impl Spec for LyapunovSpec {
    const COMMAND: &'static str = "lyapunov";

    fn finish(&mut self) -> Result<(), CliError> {
        require_linear(self.kind)?;
        finish_model(self.kind, &self.model, &mut self.beta)?;
        check(self.n_seeds >= 1, || "n_seeds must be >= 1".into())
    }
}

impl Command for LyapunovSpec {
    fn stem(&self) -> String {
        format!("lyapunov-{}", self.kind)
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let r = lyapunov(self)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let table = Table {
            header: ["seed", "lambda1", "std_error", "discretization_error", "uncertainty"].map(String::from).to_vec(),
            records: r
                .seeds
                .iter()
                .zip(&r.estimates)
                .map(|(s, e)| {
                    vec![
                        s.to_string(),
                        e.lambda1.to_string(),
                        e.std_error.to_string(),
                        opt(e.discretization_error),
                        e.uncertainty().to_string(),
                    ]
                })
                .collect(),
        };
        Ok(Outcome {
            tables: vec![("", table)],
            result: json!({ "lambda1": r.lambda1, "std_error": r.std_error, "oracle": r.oracle }),
            divergence: None,
        })
    }
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub model: ModelSpec,
    pub beta_range: [f64; 2],
    pub points: usize,
    pub n_seeds: usize,
    #[serde(flatten)]
    pub lyapunov: LyapunovConfig,
    pub format: Format,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Single,
            model: ModelSpec::default(),
            beta_range: [18.0, 24.0],
            points: 10,
            n_seeds: 8,
            lyapunov: LyapunovConfig::default(),
            format: Format::Csv,
        }
    }
}

pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, CliError> {
    let cfg = CalibrationConfig { lyapunov: spec.lyapunov, n_seeds: spec.n_seeds, ..CalibrationConfig::default() };
    Ok(lyapunov_sweep(spec.kind, &spec.model.params(spec.beta_range[0]), spec.beta_range, spec.points, &cfg)?)
}

impl Spec for SweepSpec {
    const COMMAND: &'static str = "sweep";

    fn finish(&mut self) -> Result<(), CliError> {
        require_linear(self.kind)?;
        self.model.params(self.beta_range[0]).validate()?;
        check(self.beta_range[0] < self.beta_range[1], || format!("beta_range {:?} is empty", self.beta_range))?;
        check(self.points >= 2, || "points must be >= 2".into())?;
        check(self.n_seeds >= 1, || "n_seeds must be >= 1".into())
    }
}

impl Command for SweepSpec {
    fn stem(&self) -> String {
        format!("sweep-{}", self.kind)
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let rows = sweep(self)?;
        let failed = rows.iter().filter(|r| r.error.is_some()).count();
        let oracle: Option<Vec<f64>> = (self.model.nu == 0.0)
            .then(|| {
                rows.iter()
                    .map(|r| deterministic_exponent(self.kind, &self.model.params(r.beta)))
                    .collect::<Result<_, _>>()
            })
            .transpose()?;
        Ok(Outcome {
            tables: vec![("", Table::of(&rows[..]))],
            result: json!({ "points": rows.len(), "failed": failed, "oracle": oracle }),
            divergence: (failed > 0).then(|| format!("{failed} sweep points failed")),
        })
    }
}

// ---------------------------------------------------------------- calibrate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateSpec {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub model: ModelSpec,
    /// Exponent to hit (1/s).
    pub target: f64,
    pub bracket: [f64; 2],
    pub n_seeds: usize,
    pub max_iterations: usize,
    pub lambda_tol: f64,
    pub width_tol: f64,
    #[serde(flatten)]
    pub lyapunov: LyapunovConfig,
    pub format: Format,
}

impl Default for CalibrateSpec {
    fn default() -> Self {
        let c = CalibrationConfig::default();
        Self {
            kind: ModelKind::Single,
            model: ModelSpec::default(),
            target: 5e-4,
            bracket: [18.0, 24.0],
            n_seeds: c.n_seeds,
            max_iterations: c.max_iterations,
            lambda_tol: c.lambda_tol,
            width_tol: c.width_tol,
            lyapunov: c.lyapunov,
            format: Format::Csv,
        }
    }
}

pub fn calibrate(spec: &CalibrateSpec) -> Result<BetaCalibration, CliError> {
    let cfg = CalibrationConfig {
        lyapunov: spec.lyapunov,
        n_seeds: spec.n_seeds,
        max_iterations: spec.max_iterations,
        lambda_tol: spec.lambda_tol,
        width_tol: spec.width_tol,
    };
    Ok(calibrate_beta(spec.kind, &spec.model.params(spec.bracket[0]), spec.target, spec.bracket, &cfg)?)
}

impl Spec for CalibrateSpec {
    const COMMAND: &'static str = "calibrate";

    fn finish(&mut self) -> Result<(), CliError> {
        require_linear(self.kind)?;
        self.model.params(self.bracket[0]).validate()?;
        check(self.bracket[0] < self.bracket[1], || format!("bracket {:?} is empty", self.bracket))?;
        check(self.target.is_finite(), || "target must be finite".into())?;
        check(self.n_seeds >= 1, || "n_seeds must be >= 1".into())
    }
}

impl Command for CalibrateSpec {
    fn stem(&self) -> String {
        format!("calibrate-{}", self.kind)
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let c = calibrate(self)?;
        Ok(Outcome {
            tables: vec![("", Table::of(&c.evaluations[..]))],
            result: json!({
                "beta_star": c.beta_star,
                "achieved": c.achieved,
                "achieved_std_error": c.achieved_std_error,
                "iterations": c.iterations,
                "final_bracket": c.final_bracket,
            }),
            divergence: None,
        })
    }
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub model: ModelSpec,
    pub beta: Option<f64>,
    pub horizon: f64,
    pub downsample: usize,
    /// Defaults to the stick-1 balancing error.
    pub channel: Option<String>,
    pub segment_len: usize,
    pub overlap: f64,
    /// Frequency band of the slope fit (Hz).
    pub band: [f64; 2],
    pub initial_error: f64,
    pub format: Format,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Single,
            model: ModelSpec::default(),
            beta: None,
            horizon: 1e4,
            downsample: 10,
            channel: None,
            segment_len: 1 << 14,
            overlap: 0.5,
            band: [0.01, 10.0],
            initial_error: DEFAULT_INITIAL_ERROR,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRun {
    pub spectrum: PowerSpectrum,
    pub fit: SlopeFit,
    pub diverged_at: Option<f64>,
}

pub fn spectrum(spec: &SpectrumSpec) -> Result<SpectrumRun, CliError> {
    let label = spec.channel.clone().unwrap_or_else(|| Channel::Error(1).label(spec.kind));
    let req = SimRequest {
        initial_error: spec.initial_error,
        ..SimRequest::new(spec.kind, spec.model.params(spec.beta.unwrap_or(reference_beta(spec.kind))), spec.horizon)
            .channels(&[label.as_str()])
            .downsample(spec.downsample)
    };
    let out = simulate(&req)?;
    let spectrum = power_spectrum(&out.series[0], spec.segment_len, spec.overlap)?;
    let fit = fit_two_regime_slopes(&spectrum, spec.band)?;
    Ok(SpectrumRun { spectrum, fit, diverged_at: out.diverged_at })
}

impl Spec for SpectrumSpec {
    const COMMAND: &'static str = "spectrum";

    fn finish(&mut self) -> Result<(), CliError> {
        finish_model(self.kind, &self.model, &mut self.beta)?;
        let label = self.channel.get_or_insert_with(|| Channel::Error(1).label(self.kind));
        Channel::parse(label, self.kind)?;
        check(self.downsample >= 1, || "downsample must be >= 1".into())?;
        let samples = (self.horizon / (self.model.dt * self.downsample as f64)).floor();
        check(samples >= self.segment_len as f64, || {
            format!("horizon gives {samples} samples, fewer than one segment of {}", self.segment_len)
        })?;
        check(self.band[0] > 0.0 && self.band[1] >= 100.0 * self.band[0], || {
            format!("band {:?} must be positive and span two decades", self.band)
        })
    }
}

impl Command for SpectrumSpec {
    fn stem(&self) -> String {
        format!("spectrum-{}", self.kind)
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let r = spectrum(self)?;
        Ok(Outcome {
            tables: vec![("", Table::of(&r.spectrum)), ("-fit", Table::of(&r.fit))],
            result: json!({
                "slope_low": r.fit.slope_low,
                "slope_high": r.fit.slope_high,
                "breakpoint": r.fit.breakpoint,
                "improvement": r.fit.improvement,
                "second_regime": r.fit.second_regime,
                "segments": r.spectrum.segments,
            }),
            divergence: r.diverged_at.map(|t| format!("run diverged at t = {t} s")),
        })
    }
}

// ---------------------------------------------------------------- rms-ensemble

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsEnsembleSpec {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub model: ModelSpec,
    pub beta: Option<f64>,
    pub horizon: f64,
    /// Realizations, seeds `seed + r`.
    pub n: usize,
    pub downsample: usize,
    pub format: Format,
}

impl Default for RmsEnsembleSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Single,
            model: ModelSpec::default(),
            beta: None,
            horizon: 1200.0,
            n: 500,
            downsample: 10,
            format: Format::Csv,
        }
    }
}

pub fn rms_ensemble(spec: &RmsEnsembleSpec) -> Result<EnsembleRms, CliError> {
    let p = spec.model.params(spec.beta.unwrap_or(reference_beta(spec.kind)));
    Ok(ensemble_rms(spec.kind, &p, spec.horizon, spec.n, spec.downsample)?)
}

impl Spec for RmsEnsembleSpec {
    const COMMAND: &'static str = "rms-ensemble";

    fn finish(&mut self) -> Result<(), CliError> {
        finish_model(self.kind, &self.model, &mut self.beta)?;
        check(self.n >= 2, || "n must be >= 2".into())?;
        check(self.horizon > 0.0, || "horizon must be > 0".into())?;
        check(self.downsample >= 1, || "downsample must be >= 1".into())
    }
}

impl Command for RmsEnsembleSpec {
    fn stem(&self) -> String {
        format!("rms-ensemble-{}", self.kind)
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let e = rms_ensemble(self)?;
        Ok(Outcome {
            tables: vec![("", Table::of(&e))],
            result: json!({ "mean_log10": e.mean_log10, "headline": e.headline(), "diverged": e.diverged }),
            divergence: (e.diverged > 0).then(|| format!("{} of {} realizations diverged", e.diverged, e.rms.len())),
        })
    }
}

// ---------------------------------------------------------------- velocity-ratio

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityRatioSpec {
    #[serde(flatten)]
    pub model: ModelSpec,
    pub beta_single: Option<f64>,
    pub beta_coupled: Option<f64>,
    pub horizon: f64,
    /// Realizations pooled per model.
    pub n: usize,
    pub downsample: usize,
    pub bins: usize,
    /// Central fraction of the velocity range averaged for the headline.
    pub central: f64,
    pub format: Format,
}

impl Default for VelocityRatioSpec {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            beta_single: None,
            beta_coupled: None,
            horizon: 1200.0,
            n: 100,
            downsample: 10,
            bins: 101,
            central: 0.1,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityRatioRun {
    pub ratio: DensityRatio,
    pub central_mean: Option<f64>,
    pub diverged: [usize; 2],
}

pub fn velocity_ratio(spec: &VelocityRatioSpec) -> Result<VelocityRatioRun, CliError> {
    let bs = spec.beta_single.unwrap_or(reference_beta(ModelKind::Single));
    let bc = spec.beta_coupled.unwrap_or(reference_beta(ModelKind::Coupled));
    let single = pooled_channel(ModelKind::Single, &spec.model.params(bs), "dx_dot", spec.horizon, spec.n, spec.downsample)?;
    let coupled =
        pooled_channel(ModelKind::Coupled, &spec.model.params(bc), "dq1_dot", spec.horizon, spec.n, spec.downsample)?;
    let ratio = velocity_density_ratio(&coupled.series, &single.series, spec.bins)?;
    let central_mean = ratio.central_mean(spec.central);
    Ok(VelocityRatioRun { ratio, central_mean, diverged: [single.diverged, coupled.diverged] })
}

impl Spec for VelocityRatioSpec {
    const COMMAND: &'static str = "velocity-ratio";

    fn finish(&mut self) -> Result<(), CliError> {
        finish_model(ModelKind::Single, &self.model, &mut self.beta_single)?;
        finish_model(ModelKind::Coupled, &self.model, &mut self.beta_coupled)?;
        check(self.n >= 1, || "n must be >= 1".into())?;
        check(self.horizon > 0.0, || "horizon must be > 0".into())?;
        check(self.bins >= 1, || "bins must be >= 1".into())?;
        check(self.downsample >= 1, || "downsample must be >= 1".into())?;
        check(self.central > 0.0 && self.central <= 1.0, || format!("central must lie in (0, 1], got {}", self.central))
    }
}

impl Command for VelocityRatioSpec {
    fn stem(&self) -> String {
        "velocity-ratio".into()
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let r = velocity_ratio(self)?;
        let [ds, dc] = r.diverged;
        Ok(Outcome {
            tables: vec![("", Table::of(&r.ratio))],
            result: json!({
                "central_mean": r.central_mean,
                "range": r.ratio.range,
                "diverged_single": ds,
                "diverged_coupled": dc,
            }),
            divergence: (ds + dc > 0).then(|| format!("{ds} single and {dc} coupled realizations diverged")),
        })
    }
}

// ---------------------------------------------------------------- stcc

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StccSpec {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub model: ModelSpec,
    pub beta: Option<f64>,
    pub horizon: f64,
    pub downsample: usize,
    /// Leading signal; defaults to the tip velocity.
    pub x: Option<String>,
    /// Lagging signal; defaults to the stick-1 base velocity.
    pub y: Option<String>,
    /// Window start (s).
    pub t: f64,
    pub window: f64,
    pub max_lag: f64,
    pub symmetric: bool,
    /// Window step of the peak series (s).
    pub hop: f64,
    pub search: [f64; 2],
    pub prominence: f64,
    pub format: Format,
}

impl Default for StccSpec {
    fn default() -> Self {
        let rule = PeakRule::default();
        Self {
            kind: ModelKind::Single,
            model: ModelSpec::default(),
            beta: None,
            horizon: 60.0,
            downsample: 5,
            x: None,
            y: None,
            t: 30.0,
            window: 5.0,
            max_lag: 0.5,
            symmetric: false,
            hop: 1.0,
            search: rule.search,
            prominence: rule.prominence,
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StccRun {
    pub stcc: StccResult,
    pub peak: Option<f64>,
    pub peaks: PeakSeries,
    pub diverged_at: Option<f64>,
}

pub fn stcc_run(spec: &StccSpec) -> Result<StccRun, CliError> {
    let x = spec.x.clone().unwrap_or_else(|| Channel::TipVel.label(spec.kind));
    let y = spec.y.clone().unwrap_or_else(|| Channel::BaseVel(1).label(spec.kind));
    let p = spec.model.params(spec.beta.unwrap_or(reference_beta(spec.kind)));
    let out = simulate(&SimRequest::new(spec.kind, p, spec.horizon).channels(&[&x, &y]).downsample(spec.downsample))?;
    let lags = if spec.symmetric { LagRange::symmetric(spec.max_lag) } else { LagRange::nonnegative(spec.max_lag) };
    let rule = PeakRule { search: spec.search, prominence: spec.prominence };
    let r = stcc(&out.series[0], &out.series[1], spec.t, spec.window, lags)?;
    let peak = first_dominant_peak(&r, &rule);
    let peaks = peak_series(&out.series[0], &out.series[1], spec.window, spec.hop, &rule)?;
    Ok(StccRun { stcc: r, peak, peaks, diverged_at: out.diverged_at })
}

impl Spec for StccSpec {
    const COMMAND: &'static str = "stcc";

    fn finish(&mut self) -> Result<(), CliError> {
        finish_model(self.kind, &self.model, &mut self.beta)?;
        let kind = self.kind;
        Channel::parse(self.x.get_or_insert_with(|| Channel::TipVel.label(kind)), kind)?;
        Channel::parse(self.y.get_or_insert_with(|| Channel::BaseVel(1).label(kind)), kind)?;
        check(self.downsample >= 1, || "downsample must be >= 1".into())?;
        check(self.window > 0.0 && self.hop > 0.0 && self.max_lag >= 0.0, || {
            "window and hop must be > 0 and max_lag >= 0".into()
        })?;
        check(self.t >= 0.0 && self.t + self.window + self.max_lag <= self.horizon, || {
            format!("window [{}, {}] plus lags does not fit in the {} s run", self.t, self.t + self.window, self.horizon)
        })
    }
}

impl Command for StccSpec {
    fn stem(&self) -> String {
        format!("stcc-{}", self.kind)
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let r = stcc_run(self)?;
        Ok(Outcome {
            tables: vec![("", Table::of(&r.stcc)), ("-peaks", Table::of(&r.peaks))],
            result: json!({ "peak": r.peak, "argmax": r.stcc.argmax(), "windows": r.peaks.starts.len() }),
            divergence: r.diverged_at.map(|t| format!("run diverged at t = {t} s")),
        })
    }
}

// ---------------------------------------------------------------- peak-density

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakDensitySpec {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub model: ModelSpec,
    pub beta: Option<f64>,
    pub n: usize,
    pub horizon: f64,
    pub window: f64,
    pub hop: f64,
    pub downsample: usize,
    pub bin_width: f64,
    pub search: [f64; 2],
    pub prominence: f64,
    pub format: Format,
}

impl Default for PeakDensitySpec {
    fn default() -> Self {
        let c = PeakDensityConfig::default();
        Self {
            kind: ModelKind::Single,
            model: ModelSpec::default(),
            beta: None,
            n: c.n_real,
            horizon: c.horizon,
            window: c.window,
            hop: c.hop,
            downsample: c.downsample,
            bin_width: c.bin_width,
            search: c.rule.search,
            prominence: c.rule.prominence,
            format: Format::Csv,
        }
    }
}

pub fn peak_density_run(spec: &PeakDensitySpec) -> Result<PeakDensity, CliError> {
    let cfg = PeakDensityConfig {
        n_real: spec.n,
        horizon: spec.horizon,
        window: spec.window,
        hop: spec.hop,
        downsample: spec.downsample,
        bin_width: spec.bin_width,
        rule: PeakRule { search: spec.search, prominence: spec.prominence },
    };
    let p = spec.model.params(spec.beta.unwrap_or(reference_beta(spec.kind)));
    Ok(peak_density(spec.kind, &p, &cfg)?)
}

impl Spec for PeakDensitySpec {
    const COMMAND: &'static str = "peak-density";

    fn finish(&mut self) -> Result<(), CliError> {
        finish_model(self.kind, &self.model, &mut self.beta)?;
        check(self.n >= 1, || "n must be >= 1".into())?;
        check(self.window > 0.0 && self.hop > 0.0 && self.bin_width > 0.0, || {
            "window, hop and bin_width must be > 0".into()
        })?;
        check(self.horizon >= self.window, || "horizon must cover one window".into())?;
        check(self.downsample >= 1, || "downsample must be >= 1".into())
    }
}

impl Command for PeakDensitySpec {
    fn stem(&self) -> String {
        format!("peak-density-{}", self.kind)
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let d = peak_density_run(self)?;
        let (lag, height) = d.mode();
        Ok(Outcome {
            tables: vec![("", Table::of(&d))],
            result: json!({
                "mode_lag": lag,
                "mode_density": height,
                "mass_below_tau": d.mass_below(self.model.tau),
                "windows": d.windows,
                "absent": d.absent,
                "diverged": d.diverged,
            }),
            divergence: (d.diverged > 0).then(|| format!("{} realizations diverged", d.diverged)),
        })
    }
}

// ---------------------------------------------------------------- analyze-trials

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSpec {
    /// Trial files, or directories searched for them.
    pub paths: Vec<PathBuf>,
    pub grouping: Grouping,
    pub window: f64,
    pub hop: f64,
    pub search: [f64; 2],
    pub prominence: f64,
    pub format: Format,
}

impl Default for AnalyzeSpec {
    fn default() -> Self {
        let c = ReportConfig::default();
        Self {
            paths: Vec::new(),
            grouping: c.grouping,
            window: c.window,
            hop: c.hop,
            search: c.rule.search,
            prominence: c.rule.prominence,
            format: Format::Csv,
        }
    }
}

impl AnalyzeSpec {
    pub fn report_config(&self) -> ReportConfig {
        ReportConfig {
            window: self.window,
            hop: self.hop,
            rule: PeakRule { search: self.search, prominence: self.prominence },
            grouping: self.grouping,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeRun {
    pub report: TrialReport,
    /// Files that could not be read, with the reason.
    pub unreadable: Vec<(PathBuf, String)>,
    pub warnings: Vec<String>,
}

fn expand(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in paths {
        match std::fs::read_dir(p) {
            Ok(entries) => {
                let mut found: Vec<PathBuf> = entries
                    .flatten()
                    .map(|e| e.path())
                    .filter(|f| f.to_string_lossy().ends_with(&format!(".{TRIAL_EXTENSION}")))
                    .collect();
                found.sort();
                out.extend(found);
            }
            Err(_) => out.push(p.clone()),
        }
    }
    out
}

fn trial_name(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(&format!(".{TRIAL_EXTENSION}")).map(str::to_string).unwrap_or(name)
}

pub fn analyze_trials(spec: &AnalyzeSpec) -> Result<AnalyzeRun, CliError> {
    let mut records: Vec<(String, TrialRecord)> = Vec::new();
    let mut unreadable = Vec::new();
    let mut warnings = Vec::new();
    for path in expand(&spec.paths) {
        match load(&path) {
            Ok(loaded) => {
                warnings.extend(loaded.warnings.into_iter().map(|w| format!("{}: {w}", path.display())));
                records.push((trial_name(&path), loaded.record));
            }
            Err(e) => unreadable.push((path, e.to_string())),
        }
    }
    if let (true, Some((path, e))) = (records.is_empty(), unreadable.first()) {
        return Err(CliError::Io { path: path.clone(), message: format!("no readable trial files; {e}") });
    }
    let report = trial_report(&records, &spec.report_config());
    Ok(AnalyzeRun { report, unreadable, warnings })
}

impl Spec for AnalyzeSpec {
    const COMMAND: &'static str = "analyze-trials";

    fn finish(&mut self) -> Result<(), CliError> {
        check(!self.paths.is_empty(), || "at least one trial file is required".into())?;
        check(self.window > 0.0 && self.hop > 0.0, || "window and hop must be > 0".into())
    }
}

impl Command for AnalyzeSpec {
    fn stem(&self) -> String {
        "trials".into()
    }

    fn format(&self) -> Format {
        self.format
    }

    fn run(&self) -> Result<Outcome, CliError> {
        let r = analyze_trials(self)?;
        for (p, e) in &r.unreadable {
            eprintln!("unreadable: {}: {e}", p.display());
        }
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
        Ok(Outcome {
            tables: vec![
                ("", Table::of(&TrialRows(&r.report))),
                ("-subjects", Table::of(&SubjectRows(&r.report))),
                ("-groups", Table::of(&GroupRows(&r.report))),
            ],
            result: json!({
                "rows": r.report.rows.len(),
                "groups": r.report.groups,
                "excluded": r.report.excluded,
                "unreadable": r.unreadable.iter().map(|(p, e)| json!({ "path": p, "error": e })).collect::<Vec<_>>(),
                "warnings": r.warnings,
            }),
            divergence: None,
        })
    }
}
