use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    CoupledInit, CoupledState, ModelKind, ModelParams, NoiseStream, NonlinearInit, NonlinearState,
    SddeError, SingleInit, SingleState,
};
use crate::series::TimeSeries;

/// Observable recorded by [`simulate`]. Indices are 1-based stick numbers;
/// the single and nonlinear models only have stick 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    TipPos,
    TipVel,
    BasePos(u8),
    BaseVel(u8),
    /// Balancing error `tip - base` (the angle for the nonlinear model).
    Error(u8),
    ErrorRate(u8),
    /// Feedback force `beta R(t) error(t - tau)`.
    Control(u8),
}

impl Channel {
    pub fn label(&self, kind: ModelKind) -> String {
        match (kind, self) {
            (ModelKind::Nonlinear, Channel::Error(_)) => "theta".into(),
            (ModelKind::Nonlinear, Channel::ErrorRate(_)) => "omega".into(),
            (ModelKind::Nonlinear, Channel::Control(_)) => "u".into(),
            (ModelKind::Single, Channel::TipPos) => "x_T".into(),
            (ModelKind::Single, Channel::TipVel) => "v_T".into(),
            (ModelKind::Single, Channel::BasePos(_)) => "x_M".into(),
            (ModelKind::Single, Channel::BaseVel(_)) => "v_M".into(),
            (ModelKind::Single, Channel::Error(_)) => "dx".into(),
            (ModelKind::Single, Channel::ErrorRate(_)) => "dx_dot".into(),
            (ModelKind::Single, Channel::Control(_)) => "u".into(),
            (_, Channel::TipPos) => "q_T".into(),
            (_, Channel::TipVel) => "v_T".into(),
            (_, Channel::BasePos(i)) => format!("q_M{i}"),
            (_, Channel::BaseVel(i)) => format!("v_M{i}"),
            (_, Channel::Error(i)) => format!("dq{i}"),
            (_, Channel::ErrorRate(i)) => format!("dq{i}_dot"),
            (_, Channel::Control(i)) => format!("u{i}"),
        }
    }

    /// Every channel the model exposes.
    pub fn all(kind: ModelKind) -> Vec<Channel> {
        use Channel::*;
        match kind {
            ModelKind::Single => vec![TipPos, TipVel, BasePos(1), BaseVel(1), Error(1), ErrorRate(1), Control(1)],
            ModelKind::Coupled => vec![
                TipPos,
                TipVel,
                BasePos(1),
                BasePos(2),
                BaseVel(1),
                BaseVel(2),
                Error(1),
                Error(2),
                ErrorRate(1),
                ErrorRate(2),
                Control(1),
                Control(2),
            ],
            ModelKind::Nonlinear => vec![Error(1), ErrorRate(1), Control(1)],
        }
    }

    pub fn parse(label: &str, kind: ModelKind) -> Result<Channel, SddeError> {
        Channel::all(kind)
            .into_iter()
            .find(|c| c.label(kind) == label)
            .ok_or_else(|| SddeError::InvalidParams(format!("model `{kind}` has no channel `{label}`")))
    }

    fn stick(&self) -> usize {
        match *self {
            Channel::BasePos(i) | Channel::BaseVel(i) | Channel::Error(i) | Channel::ErrorRate(i) | Channel::Control(i) => {
                i as usize
            }
            _ => 1,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label(ModelKind::Coupled))
    }
}

/// One of the three model states behind a common interface.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemState {
    Single(SingleState),
    Coupled(CoupledState),
    Nonlinear(NonlinearState),
}

impl SystemState {
    /// Starts every model at rest with balancing error `error`.
    pub fn at_rest(kind: ModelKind, p: &ModelParams, error: f64) -> Result<Self, SddeError> {
        Ok(match kind {
            ModelKind::Single => SystemState::Single(SingleState::new(p, SingleInit::at_rest(error))?),
            ModelKind::Coupled => SystemState::Coupled(CoupledState::new(p, CoupledInit::at_rest(error))?),
            ModelKind::Nonlinear => SystemState::Nonlinear(NonlinearState::new(
                p,
                NonlinearInit { angle: error, angular_vel: 0.0 },
            )?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            SystemState::Single(_) => ModelKind::Single,
            SystemState::Coupled(_) => ModelKind::Coupled,
            SystemState::Nonlinear(_) => ModelKind::Nonlinear,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            SystemState::Single(s) => s.t,
            SystemState::Coupled(s) => s.t,
            SystemState::Nonlinear(s) => s.t,
        }
    }

    /// Noise streams the model draws from, seeded from `seed`.
    pub fn noise_streams(kind: ModelKind, seed: u64) -> Vec<NoiseStream> {
        match kind {
            ModelKind::Coupled => vec![NoiseStream::new(seed, 0), NoiseStream::new(seed, 1)],
            _ => vec![NoiseStream::new(seed, 0)],
        }
    }

    pub fn step(&mut self, p: &ModelParams, noise: &mut [NoiseStream]) -> Result<(), SddeError> {
        match self {
            SystemState::Single(s) => s.step_with(p, &mut noise[0]),
            SystemState::Coupled(s) => {
                let xi = [noise[0].next_gaussian(), noise[1].next_gaussian()];
                s.step(p, xi)
            }
            SystemState::Nonlinear(s) => s.step_with(p, &mut noise[0]),
        }
    }

    pub fn read(&self, channel: Channel) -> f64 {
        let i = channel.stick().clamp(1, 2) - 1;
        match self {
            SystemState::Single(s) => match channel {
                Channel::TipPos => s.tip,
                Channel::TipVel => s.tip_vel,
                Channel::BasePos(_) => s.base,
                Channel::BaseVel(_) => s.base_vel,
                Channel::Error(_) => s.error(),
                Channel::ErrorRate(_) => s.error_rate(),
                Channel::Control(_) => s.control,
            },
            SystemState::Coupled(s) => match channel {
                Channel::TipPos => s.tip,
                Channel::TipVel => s.tip_vel,
                Channel::BasePos(_) => s.bases[i],
                Channel::BaseVel(_) => s.base_vels[i],
                Channel::Error(_) => s.error(i),
                Channel::ErrorRate(_) => s.error_rate(i),
                Channel::Control(_) => s.controls[i],
            },
            SystemState::Nonlinear(s) => match channel {
                Channel::ErrorRate(_) => s.angular_vel,
                Channel::Control(_) => s.control,
                _ => s.angle,
            },
        }
    }
}

/// Inputs of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRequest {
    pub kind: ModelKind,
    pub params: ModelParams,
    /// Simulated time (s).
    pub horizon: f64,
    /// Channel labels, e.g. `dx` or `dq1_dot`.
    pub channels: Vec<String>,
    /// Record every `downsample`-th integration step.
    pub downsample: usize,
    /// Balancing error at t = 0; the sticks start at rest.
    pub initial_error: f64,
}

impl SimRequest {
    pub fn new(kind: ModelKind, params: ModelParams, horizon: f64) -> Self {
        Self {
            kind,
            params,
            horizon,
            channels: vec![Channel::Error(1).label(kind)],
            downsample: 1,
            initial_error: DEFAULT_INITIAL_ERROR,
        }
    }

    pub fn channels(mut self, labels: &[&str]) -> Self {
        self.channels = labels.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn downsample(mut self, factor: usize) -> Self {
        self.downsample = factor;
        self
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.params.dt).round() as u64
    }
}

/// Initial balancing error of numerical runs, the offset between tip and base
/// at the start of the tracking experiment.
pub const DEFAULT_INITIAL_ERROR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub series: Vec<TimeSeries>,
    /// Time of blow-up, when the run stopped early.
    pub diverged_at: Option<f64>,
}

impl SimOutput {
    pub fn channel(&self, label: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.label == label)
    }
}

/// Integrates `req.kind` for `req.horizon` seconds and samples the requested
/// channels before each recorded step. Deterministic in `req.params.seed`.
pub fn simulate(req: &SimRequest) -> Result<SimOutput, SddeError> {
    req.params.validate()?;
    if !(req.horizon >= 0.0) || !req.horizon.is_finite() {
        return Err(SddeError::InvalidParams(format!("horizon must be >= 0, got {}", req.horizon)));
    }
    if req.downsample == 0 {
        return Err(SddeError::InvalidParams("downsample must be >= 1".into()));
    }
    let channels: Vec<Channel> = req
        .channels
        .iter()
        .map(|l| Channel::parse(l, req.kind))
        .collect::<Result<_, _>>()?;
    let p = &req.params;
    let mut state = SystemState::at_rest(req.kind, p, req.initial_error)?;
    let mut noise = SystemState::noise_streams(req.kind, p.seed);
    let steps = req.steps();
    let ds = req.downsample as u64;
    let cap = (steps / ds + 1) as usize;
    let mut data: Vec<Vec<f64>> = channels.iter().map(|_| Vec::with_capacity(cap)).collect();
    let mut diverged_at = None;
    for k in 0..steps {
        if k % ds == 0 {
            for (buf, &c) in data.iter_mut().zip(&channels) {
                buf.push(state.read(c));
            }
        }
        if let Err(e) = state.step(p, &mut noise) {
            match e {
                SddeError::Diverged { t } => {
                    diverged_at = Some(t);
                    break;
                }
                other => return Err(other),
            }
        }
    }
    let dt_sample = p.dt * req.downsample as f64;
    let series = channels
        .iter()
        .zip(data)
        .map(|(c, samples)| TimeSeries::new(c.label(req.kind), dt_sample, samples))
        .collect();
    Ok(SimOutput { series, diverged_at })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_gives_empty_labelled_series() {
        let req = SimRequest::new(ModelKind::Coupled, ModelParams::default(), 0.0).channels(&["dq1", "v_T"]);
        let out = simulate(&req).unwrap();
        assert_eq!(out.series.len(), 2);
        assert!(out.series.iter().all(|s| s.is_empty()));
        assert_eq!(out.series[0].label, "dq1");
        assert_eq!(out.diverged_at, None);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let req = SimRequest::new(ModelKind::Single, ModelParams::default().with_seed(4), 20.0)
            .channels(&["dx", "v_M", "u"])
            .downsample(10);
        let a = simulate(&req).unwrap();
        let b = simulate(&req).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.series[0].len(), 2000);
        let c = simulate(&SimRequest { params: req.params.with_seed(5), ..req.clone() }).unwrap();
        assert_ne!(a.series[0].samples, c.series[0].samples);
    }

    #[test]
    fn unknown_channel_is_rejected() {
        let req = SimRequest::new(ModelKind::Single, ModelParams::default(), 1.0).channels(&["dq2"]);
        assert!(simulate(&req).is_err());
        assert!(Channel::parse("theta", ModelKind::Nonlinear).is_ok());
    }

    #[test]
    fn divergence_keeps_partial_series() {
        let p = ModelParams { beta: 0.0, nu: 0.0, ..Default::default() };
        let mut req = SimRequest::new(ModelKind::Single, p, 200.0);
        req.initial_error = 1e6;
        let out = simulate(&req).unwrap();
        let t = out.diverged_at.expect("should diverge");
        assert!(t < 200.0);
        assert!(!out.series[0].is_empty());
        assert!(out.series[0].len() < 200_000);
    }

    #[test]
    fn all_channels_label_uniquely() {
        for kind in [ModelKind::Single, ModelKind::Coupled, ModelKind::Nonlinear] {
            let labels: Vec<String> = Channel::all(kind).iter().map(|c| c.label(kind)).collect();
            let mut dedup = labels.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), labels.len());
            for l in &labels {
                assert_eq!(Channel::parse(l, kind).unwrap().label(kind), *l);
            }
        }
    }
}
