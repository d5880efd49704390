//! The `serve` subcommand: one tracking session per invocation.

use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;

use balance_core::trial::{SessionConfig, TrialMode, TRIAL_EXTENSION};
use balance_service::{serve, ServiceConfig, SessionSummary};
use rand::distr::{Alphanumeric, SampleString};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use crate::output::Manifest;
use crate::resolve::Spec;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeSpec {
    pub mode: TrialMode,
    /// Generated when absent.
    pub code: Option<String>,
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    /// Wall-clock speed-up, for rehearsals and tests.
    pub speed: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub tau: f64,
    pub dt: f64,
    pub rod_length: f64,
    pub tick_rate: f64,
    pub max_duration: f64,
    pub visible_range: [f64; 2],
    pub screen_width: u32,
    pub countdown: u32,
    pub initial_tip: f64,
    /// One per subject; mode dependent when absent.
    pub initial_bases: Option<Vec<f64>>,
}

impl Default for ServeSpec {
    fn default() -> Self {
        let c = SessionConfig::new(TrialMode::Single);
        Self {
            mode: c.mode,
            code: None,
            host: "127.0.0.1".into(),
            port: 8080,
            speed: 1.0,
            gamma: c.gamma,
            alpha: c.alpha,
            beta: c.beta,
            nu: c.nu,
            tau: c.tau,
            dt: c.dt,
            rod_length: c.rod_length,
            tick_rate: c.tick_rate,
            max_duration: c.max_duration,
            visible_range: c.visible_range,
            screen_width: c.screen_width,
            countdown: c.countdown,
            initial_tip: c.initial_tip,
            initial_bases: None,
        }
    }
}

impl ServeSpec {
    pub fn session(&self) -> SessionConfig {
        let defaults = SessionConfig::new(self.mode);
        SessionConfig {
            mode: self.mode,
            gamma: self.gamma,
            alpha: self.alpha,
            beta: self.beta,
            nu: self.nu,
            tau: self.tau,
            dt: self.dt,
            rod_length: self.rod_length,
            tick_rate: self.tick_rate,
            max_duration: self.max_duration,
            visible_range: self.visible_range,
            screen_width: self.screen_width,
            countdown: self.countdown,
            initial_tip: self.initial_tip,
            initial_bases: self.initial_bases.clone().unwrap_or(defaults.initial_bases),
        }
    }
}

impl Spec for ServeSpec {
    const COMMAND: &'static str = "serve";

    fn finish(&mut self) -> Result<(), CliError> {
        if self.initial_bases.is_none() {
            self.initial_bases = Some(SessionConfig::new(self.mode).initial_bases);
        }
        if self.code.is_none() {
            self.code = Some(Alphanumeric.sample_string(&mut rand::rng(), 6).to_lowercase());
        }
        self.session().validate()?;
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(CliError::Validation(format!("speed must be > 0, got {}", self.speed)));
        }
        Ok(())
    }
}

/// Binds, announces the session on stdout, runs it to the end and writes the
/// manifest next to the trial file.
pub async fn run_serve(
    spec: &ServeSpec,
    out_dir: &Path,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(SessionSummary, Manifest), CliError> {
    let addr = format!("{}:{}", spec.host, spec.port);
    let listener = TcpListener::bind(&addr).await.map_err(|e| CliError::io(&addr, e))?;
    let local: SocketAddr = listener.local_addr().map_err(|e| CliError::io(&addr, e))?;
    let code = spec.code.clone().expect("resolved specs carry a code");
    println!("session {code}");
    println!("connect ws://{local}/ws");
    let cfg = ServiceConfig { session: spec.session(), code, out_dir: out_dir.to_path_buf(), speed: spec.speed };
    let summary = serve(listener, cfg, shutdown).await.map_err(|e| match e {
        balance_service::ServiceError::Config(m) => CliError::from(m),
        balance_service::ServiceError::Io(p, e) => CliError::io(p, e),
        balance_service::ServiceError::Trial(t) => CliError::from(t),
        other => CliError::Failed(other.to_string()),
    })?;
    println!("trial {} ({}, {} ticks)", summary.path.display(), summary.cause, summary.ticks);
    let stem = summary
        .path
        .file_name()
        .map(|n| n.to_string_lossy().trim_end_matches(&format!(".{TRIAL_EXTENSION}")).to_string())
        .unwrap_or_else(|| "serve".into());
    let manifest = Manifest {
        command: ServeSpec::COMMAND.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        spec: serde_json::to_value(spec).expect("specs serialize"),
        outputs: summary.path.file_name().map(Into::into).into_iter().collect(),
        result: json!({ "cause": summary.cause, "ticks": summary.ticks, "subjects": summary.subjects, "port": local.port() }),
        divergence: None,
        jobs: 1,
    };
    manifest.write(&out_dir.join(format!("{stem}.manifest.json")))?;
    Ok((summary, manifest))
}
