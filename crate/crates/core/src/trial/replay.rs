use crate::series::TimeSeries;

use super::{TrialError, TrialRecord};

/// Series extracted from a record. Stick indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayChannel {
    TipPos,
    BasePos(u8),
    Error(u8),
    /// Backward difference of the tip position.
    TipVel,
    /// Backward difference of a base position.
    BaseVel(u8),
}

impl ReplayChannel {
    pub fn label(&self) -> String {
        match self {
            ReplayChannel::TipPos => "tip".into(),
            ReplayChannel::BasePos(i) => format!("base{i}"),
            ReplayChannel::Error(i) => format!("error{i}"),
            ReplayChannel::TipVel => "tip_vel".into(),
            ReplayChannel::BaseVel(i) => format!("base{i}_vel"),
        }
    }
}

/// Model-unit series sampled at the tick interval.
pub fn replay(record: &TrialRecord, channels: &[ReplayChannel]) -> Result<Vec<TimeSeries>, TrialError> {
    let path = std::path::PathBuf::from(&record.header.session);
    if record.rows.is_empty() {
        return Err(TrialError::Malformed { path, line: 1, message: "record has no ticks".into() });
    }
    let dt = 1.0 / record.header.config.tick_rate;
    let n = record.header.config.mode.subjects();
    channels
        .iter()
        .map(|c| {
            let stick = |i: u8| -> Result<usize, TrialError> {
                let k = i as usize;
                if k == 0 || k > n {
                    return Err(TrialError::Malformed {
                        path: path.clone(),
                        line: 1,
                        message: format!("record has no stick {i}"),
                    });
                }
                Ok(k - 1)
            };
            let samples: Vec<f64> = match *c {
                ReplayChannel::TipPos | ReplayChannel::TipVel => record.rows.iter().map(|r| r.tip).collect(),
                ReplayChannel::BasePos(i) | ReplayChannel::BaseVel(i) => {
                    let k = stick(i)?;
                    record.rows.iter().map(|r| r.bases[k]).collect()
                }
                ReplayChannel::Error(i) => {
                    let k = stick(i)?;
                    record.rows.iter().map(|r| r.errors[k]).collect()
                }
            };
            let s = TimeSeries::new(c.label(), dt, samples);
            Ok(match c {
                ReplayChannel::TipVel | ReplayChannel::BaseVel(_) => s.derivative(c.label()),
                _ => s,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial::{SessionConfig, TerminationCause, TrialMode};

    fn record(tip: Vec<f64>, base: Vec<f64>) -> TrialRecord {
        TrialRecord::from_series(
            "r",
            vec!["A".into()],
            SessionConfig::new(TrialMode::Single),
            &TimeSeries::new("t", 0.02, tip),
            &[TimeSeries::new("b", 0.02, base)],
            TerminationCause::Completed,
        )
        .unwrap()
    }

    #[test]
    fn replays_the_source_series() {
        let tip: Vec<f64> = (0..50).map(|k| (k as f64 * 0.1).cos()).collect();
        let base: Vec<f64> = (0..50).map(|k| (k as f64 * 0.1 - 0.3).cos()).collect();
        let r = record(tip.clone(), base.clone());
        let out = replay(&r, &[ReplayChannel::TipPos, ReplayChannel::BasePos(1), ReplayChannel::Error(1)]).unwrap();
        assert_eq!(out[0].samples, tip);
        assert_eq!(out[1].samples, base);
        assert_eq!(out[2].samples, tip.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert_eq!(out[0].dt, 0.02);
    }

    #[test]
    fn constant_positions_have_zero_velocity() {
        let r = record(vec![0.4; 20], vec![0.2; 20]);
        let out = replay(&r, &[ReplayChannel::TipVel, ReplayChannel::BaseVel(1)]).unwrap();
        assert!(out.iter().all(|s| s.samples.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn missing_stick_and_empty_record_fail() {
        let r = record(vec![0.0; 5], vec![0.0; 5]);
        assert!(replay(&r, &[ReplayChannel::Error(2)]).is_err());
        let mut e = r.clone();
        e.rows.clear();
        assert!(replay(&e, &[ReplayChannel::TipPos]).is_err());
    }
}
