use serde::{Deserialize, Serialize};

/// Uniformly sampled scalar channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub label: String,
    /// Sample interval (s).
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, dt: f64, samples: Vec<f64>) -> Self {
        assert!(dt > 0.0, "sample interval must be positive");
        Self { label: label.into(), dt, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// Keeps every `factor`-th sample.
    pub fn downsample(&self, factor: usize) -> TimeSeries {
        assert!(factor > 0);
        TimeSeries {
            label: self.label.clone(),
            dt: self.dt * factor as f64,
            samples: self.samples.iter().step_by(factor).copied().collect(),
        }
    }

    /// Backward differences, first sample zero.
    pub fn derivative(&self, label: impl Into<String>) -> TimeSeries {
        let mut out = Vec::with_capacity(self.samples.len());
        if let Some(&first) = self.samples.first() {
            let mut prev = first;
            out.push(0.0);
            for &x in &self.samples[1..] {
                out.push((x - prev) / self.dt);
                prev = x;
            }
        }
        TimeSeries { label: label.into(), dt: self.dt, samples: out }
    }

    pub fn scaled(&self, factor: f64) -> TimeSeries {
        TimeSeries {
            label: self.label.clone(),
            dt: self.dt,
            samples: self.samples.iter().map(|x| x * factor).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_ramp_is_constant() {
        let s = TimeSeries::new("x", 0.5, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.derivative("v").samples, vec![0.0, 2.0, 2.0, 2.0]);
        assert_eq!(s.duration(), 2.0);
    }

    #[test]
    fn downsample_keeps_phase() {
        let s = TimeSeries::new("x", 0.1, (0..10).map(f64::from).collect());
        let d = s.downsample(3);
        assert_eq!(d.samples, vec![0.0, 3.0, 6.0, 9.0]);
        assert!((d.dt - 0.3).abs() < 1e-15);
    }
}
