use super::{ensure_finite, guard, DelayBuffer, LinearBalancer, ModelParams, NoiseStream, SddeError};

/// Initial tip/base positions and velocities of one stick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SingleInit {
    pub tip: f64,
    pub tip_vel: f64,
    pub base: f64,
    pub base_vel: f64,
}

impl SingleInit {
    /// Screen start of the tracking experiment. The base position is not
    /// listed for the single task; it mirrors the first coupled base.
    pub const EXPERIMENT: SingleInit = SingleInit {
        tip: -0.5,
        tip_vel: 0.0,
        base: -0.6,
        base_vel: 0.0,
    };

    /// Tip displaced by `error` from a base at the origin, at rest.
    pub fn at_rest(error: f64) -> Self {
        Self { tip: error, ..Default::default() }
    }
}

/// Linear single stick in absolute coordinates:
/// `x_T'' + gamma x_T' = alpha dx(t)`, `x_M'' + gamma x_M' = beta R(t) dx(t - tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleState {
    pub tip: f64,
    pub tip_vel: f64,
    pub base: f64,
    pub base_vel: f64,
    /// History of the balancing error `tip - base`.
    pub history: DelayBuffer,
    /// Feedback force applied during the last step (white noise as `N/sqrt(dt)`).
    pub control: f64,
    pub steps: u64,
    pub t: f64,
}

impl SingleState {
    pub fn new(p: &ModelParams, init: SingleInit) -> Result<Self, SddeError> {
        let delay = p.validate()?;
        let tip = ensure_finite(init.tip, "tip position")?;
        let tip_vel = ensure_finite(init.tip_vel, "tip velocity")?;
        let base = ensure_finite(init.base, "base position")?;
        let base_vel = ensure_finite(init.base_vel, "base velocity")?;
        Ok(Self {
            tip,
            tip_vel,
            base,
            base_vel,
            history: DelayBuffer::filled(delay, tip - base),
            control: 0.0,
            steps: 0,
            t: 0.0,
        })
    }

    pub fn error(&self) -> f64 {
        self.tip - self.base
    }

    pub fn error_rate(&self) -> f64 {
        self.tip_vel - self.base_vel
    }

    /// One Euler–Maruyama step driven by the standard normal deviate `xi`.
    pub fn step(&mut self, p: &ModelParams, xi: f64) -> Result<(), SddeError> {
        let dt = p.dt;
        let error = self.tip - self.base;
        let delayed = self.history.delayed();
        let feedback = p.beta * delayed;
        let kick = p.beta * p.nu * delayed * dt.sqrt() * xi;

        let tip_vel = self.tip_vel + dt * (-p.gamma * self.tip_vel + p.alpha * error);
        let base_vel = self.base_vel + dt * (-p.gamma * self.base_vel + feedback) + kick;
        self.tip += dt * self.tip_vel;
        self.base += dt * self.base_vel;
        self.tip_vel = tip_vel;
        self.base_vel = base_vel;
        self.control = feedback + kick / dt;
        self.history.push(self.tip - self.base);
        self.tick(dt);
        guard(&[self.tip, self.tip_vel, self.base, self.base_vel], self.t)
    }

    pub fn step_with(&mut self, p: &ModelParams, noise: &mut NoiseStream) -> Result<(), SddeError> {
        let xi = noise.next_gaussian();
        self.step(p, xi)
    }

    /// Replaces the base controller by an externally imposed base position.
    ///
    /// The tip is integrated as usual; the base jumps to `base` at the end of
    /// the step with its velocity taken as the backward difference.
    pub fn drive_base(&mut self, p: &ModelParams, base: f64) -> Result<(), SddeError> {
        let base = ensure_finite(base, "external base position")?;
        let dt = p.dt;
        let error = self.tip - self.base;
        let tip_vel = self.tip_vel + dt * (-p.gamma * self.tip_vel + p.alpha * error);
        self.tip += dt * self.tip_vel;
        self.tip_vel = tip_vel;
        self.base_vel = (base - self.base) / dt;
        self.base = base;
        self.control = 0.0;
        self.history.push(self.tip - self.base);
        self.tick(dt);
        guard(&[self.tip, self.tip_vel, self.base, self.base_vel], self.t)
    }

    /// Holds `base` for `substeps` integration steps.
    pub fn drive_held(&mut self, p: &ModelParams, base: f64, substeps: usize) -> Result<(), SddeError> {
        for _ in 0..substeps {
            self.drive_base(p, base)?;
        }
        Ok(())
    }

    fn tick(&mut self, dt: f64) {
        self.steps += 1;
        self.t = self.steps as f64 * dt;
    }
}

impl LinearBalancer for SingleState {
    const NOISE_STREAMS: usize = 1;

    fn step_streams(&mut self, p: &ModelParams, noise: &mut [NoiseStream]) -> Result<(), SddeError> {
        self.step_with(p, &mut noise[0])
    }

    fn headline_norm(&self) -> f64 {
        self.error().hypot(self.error_rate())
    }

    fn full_norm(&self) -> f64 {
        let r = self.error_rate();
        (self.history.norm_sq() + r * r).sqrt()
    }

    fn rescale(&mut self, factor: f64) {
        self.tip = self.error() * factor;
        self.base = 0.0;
        self.tip_vel *= factor;
        self.base_vel *= factor;
        self.history.scale(factor);
    }

    fn time(&self) -> f64 {
        self.t
    }
}
