use super::{ensure_finite, guard, DelayBuffer, LinearBalancer, ModelParams, NoiseStream, SddeError};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoupledInit {
    pub tip: f64,
    pub tip_vel: f64,
    pub bases: [f64; 2],
    pub base_vels: [f64; 2],
}

impl CoupledInit {
    /// Screen start of the coupled tracking experiment.
    pub const EXPERIMENT: CoupledInit = CoupledInit {
        tip: -0.5,
        tip_vel: 0.0,
        bases: [-0.6, 0.6],
        base_vels: [0.0, 0.0],
    };

    /// Both sticks displaced by `error` from bases at the origin, at rest.
    pub fn at_rest(error: f64) -> Self {
        Self { tip: error, ..Default::default() }
    }
}

/// Two linear sticks whose tips are tied by a rigid rod.
///
/// The rod makes both tip velocities equal, so one shared tip coordinate
/// carries the pair; the rod length only matters for display.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub tip: f64,
    pub tip_vel: f64,
    pub bases: [f64; 2],
    pub base_vels: [f64; 2],
    pub histories: [DelayBuffer; 2],
    pub controls: [f64; 2],
    pub steps: u64,
    pub t: f64,
}

impl CoupledState {
    pub fn new(p: &ModelParams, init: CoupledInit) -> Result<Self, SddeError> {
        let delay = p.validate()?;
        let tip = ensure_finite(init.tip, "tip position")?;
        let tip_vel = ensure_finite(init.tip_vel, "tip velocity")?;
        for i in 0..2 {
            ensure_finite(init.bases[i], "base position")?;
            ensure_finite(init.base_vels[i], "base velocity")?;
        }
        Ok(Self {
            tip,
            tip_vel,
            bases: init.bases,
            base_vels: init.base_vels,
            histories: [
                DelayBuffer::filled(delay, tip - init.bases[0]),
                DelayBuffer::filled(delay, tip - init.bases[1]),
            ],
            controls: [0.0; 2],
            steps: 0,
            t: 0.0,
        })
    }

    pub fn error(&self, i: usize) -> f64 {
        self.tip - self.bases[i]
    }

    pub fn error_rate(&self, i: usize) -> f64 {
        self.tip_vel - self.base_vels[i]
    }

    /// One Euler–Maruyama step; `xi[i]` drives the gain of controller `i`.
    pub fn step(&mut self, p: &ModelParams, xi: [f64; 2]) -> Result<(), SddeError> {
        let dt = p.dt;
        let sqrt_dt = dt.sqrt();
        let errors = [self.error(0), self.error(1)];
        let tip_vel =
            self.tip_vel + dt * (-p.gamma * self.tip_vel + 0.5 * p.alpha * (errors[0] + errors[1]));
        self.tip += dt * self.tip_vel;
        self.tip_vel = tip_vel;
        for i in 0..2 {
            let delayed = self.histories[i].delayed();
            let feedback = p.beta * delayed;
            let kick = p.beta * p.nu * delayed * sqrt_dt * xi[i];
            let v = self.base_vels[i];
            self.base_vels[i] = v + dt * (-p.gamma * v + feedback) + kick;
            self.bases[i] += dt * v;
            self.controls[i] = feedback + kick / dt;
        }
        self.push_history();
        self.tick(dt);
        self.check()
    }

    pub fn step_with(
        &mut self,
        p: &ModelParams,
        noise1: &mut NoiseStream,
        noise2: &mut NoiseStream,
    ) -> Result<(), SddeError> {
        let xi = [noise1.next_gaussian(), noise2.next_gaussian()];
        self.step(p, xi)
    }

    /// Both bases imposed externally; see [`super::SingleState::drive_base`].
    pub fn drive_bases(&mut self, p: &ModelParams, bases: [f64; 2]) -> Result<(), SddeError> {
        for b in bases {
            ensure_finite(b, "external base position")?;
        }
        let dt = p.dt;
        let errors = [self.error(0), self.error(1)];
        let tip_vel =
            self.tip_vel + dt * (-p.gamma * self.tip_vel + 0.5 * p.alpha * (errors[0] + errors[1]));
        self.tip += dt * self.tip_vel;
        self.tip_vel = tip_vel;
        for i in 0..2 {
            self.base_vels[i] = (bases[i] - self.bases[i]) / dt;
            self.bases[i] = bases[i];
            self.controls[i] = 0.0;
        }
        self.push_history();
        self.tick(dt);
        self.check()
    }

    pub fn drive_held(&mut self, p: &ModelParams, bases: [f64; 2], substeps: usize) -> Result<(), SddeError> {
        for _ in 0..substeps {
            self.drive_bases(p, bases)?;
        }
        Ok(())
    }

    fn push_history(&mut self) {
        let e0 = self.error(0);
        let e1 = self.error(1);
        self.histories[0].push(e0);
        self.histories[1].push(e1);
    }

    fn tick(&mut self, dt: f64) {
        self.steps += 1;
        self.t = self.steps as f64 * dt;
    }

    fn check(&self) -> Result<(), SddeError> {
        guard(
            &[
                self.tip,
                self.tip_vel,
                self.bases[0],
                self.bases[1],
                self.base_vels[0],
                self.base_vels[1],
            ],
            self.t,
        )
    }
}

impl LinearBalancer for CoupledState {
    const NOISE_STREAMS: usize = 2;

    fn step_streams(&mut self, p: &ModelParams, noise: &mut [NoiseStream]) -> Result<(), SddeError> {
        let (a, b) = noise.split_at_mut(1);
        self.step_with(p, &mut a[0], &mut b[0])
    }

    fn headline_norm(&self) -> f64 {
        (0..2)
            .map(|i| self.error(i).powi(2) + self.error_rate(i).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn full_norm(&self) -> f64 {
        (0..2)
            .map(|i| self.histories[i].norm_sq() + self.error_rate(i).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn rescale(&mut self, factor: f64) {
        let errors = [self.error(0), self.error(1)];
        self.tip = 0.0;
        self.tip_vel *= factor;
        for i in 0..2 {
            self.bases[i] = -errors[i] * factor;
            self.base_vels[i] *= factor;
            self.histories[i].scale(factor);
        }
    }

    fn time(&self) -> f64 {
        self.t
    }
}
