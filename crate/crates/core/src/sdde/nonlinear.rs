use super::{ensure_finite, guard, DelayBuffer, ModelParams, NoiseStream, SddeError};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NonlinearInit {
    pub angle: f64,
    pub angular_vel: f64,
}

/// Inverted pendulum with the full gravity term:
/// `theta'' + gamma theta' - alpha sin(theta) + beta R(t) theta(t - tau) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearState {
    pub angle: f64,
    pub angular_vel: f64,
    pub history: DelayBuffer,
    pub control: f64,
    pub steps: u64,
    pub t: f64,
}

impl NonlinearState {
    pub fn new(p: &ModelParams, init: NonlinearInit) -> Result<Self, SddeError> {
        let delay = p.validate()?;
        let angle = ensure_finite(init.angle, "angle")?;
        let angular_vel = ensure_finite(init.angular_vel, "angular velocity")?;
        Ok(Self {
            angle,
            angular_vel,
            history: DelayBuffer::filled(delay, angle),
            control: 0.0,
            steps: 0,
            t: 0.0,
        })
    }

    pub fn step(&mut self, p: &ModelParams, xi: f64) -> Result<(), SddeError> {
        let dt = p.dt;
        let delayed = self.history.delayed();
        let feedback = p.beta * delayed;
        let kick = p.beta * p.nu * delayed * dt.sqrt() * xi;
        let w = self.angular_vel;
        self.angular_vel = w + dt * (-p.gamma * w + p.alpha * self.angle.sin() - feedback) - kick;
        self.angle += dt * w;
        self.control = feedback + kick / dt;
        self.history.push(self.angle);
        self.steps += 1;
        self.t = self.steps as f64 * dt;
        guard(&[self.angle, self.angular_vel], self.t)
    }

    pub fn step_with(&mut self, p: &ModelParams, noise: &mut NoiseStream) -> Result<(), SddeError> {
        let xi = noise.next_gaussian();
        self.step(p, xi)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{SingleInit, SingleState};
    use super::*;

    #[test]
    fn upright_equilibrium_is_invariant() {
        let p = ModelParams::default();
        let mut s = NonlinearState::new(&p, NonlinearInit::default()).unwrap();
        let mut noise = NoiseStream::new(2, 0);
        for _ in 0..1000 {
            s.step_with(&p, &mut noise).unwrap();
        }
        assert_eq!((s.angle, s.angular_vel), (0.0, 0.0));
    }

    #[test]
    fn small_angles_follow_linear_model() {
        let p = ModelParams { beta: 21.0, ..Default::default() };
        let theta0 = 1e-4;
        let mut nl = NonlinearState::new(&p, NonlinearInit { angle: theta0, angular_vel: 0.0 }).unwrap();
        let mut lin = SingleState::new(&p, SingleInit::at_rest(theta0)).unwrap();
        let mut noise = NoiseStream::new(9, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let xi = noise.next_gaussian();
            nl.step(&p, xi).unwrap();
            lin.step(&p, xi).unwrap();
            let scale = lin.error().abs().max(theta0);
            worst = worst.max((nl.angle - lin.error()).abs() / scale);
        }
        // relative force error of sin vs identity is theta^2/6 ~ 2e-9
        assert!(worst < 1e-6, "relative deviation {worst}");
    }

    #[test]
    fn sine_force_error_at_tenth_radian() {
        let theta: f64 = 0.1;
        let rel = (theta - theta.sin()) / theta.sin();
        assert!((rel - 0.00167).abs() < 2e-5, "{rel}");
    }
}
