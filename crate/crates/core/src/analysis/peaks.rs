use serde::{Deserialize, Serialize};

use super::StccResult;

/// Selection rule for the first dominant peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRule {
    /// Lag interval searched (s).
    pub search: [f64; 2],
    /// Minimum height as a fraction of the largest coefficient in `search`.
    pub prominence: f64,
}

impl Default for PeakRule {
    fn default() -> Self {
        Self { search: [0.0, 0.5], prominence: 0.8 }
    }
}

/// Smallest-lag strict local maximum inside the search range whose height
/// reaches `prominence` times the range maximum.
pub fn first_dominant_peak(r: &StccResult, rule: &PeakRule) -> Option<f64> {
    let eps = 1e-9 * (r.lags.get(1).map_or(1.0, |l| (l - r.lags[0]).abs()));
    let inside = |l: f64| l >= rule.search[0] - eps && l <= rule.search[1] + eps;
    let global = r
        .lags
        .iter()
        .zip(&r.coefficients)
        .filter(|(l, _)| inside(**l))
        .map(|(_, c)| *c)
        .fold(f64::NEG_INFINITY, f64::max);
    if !global.is_finite() {
        return None;
    }
    let threshold = rule.prominence * global;
    let c = &r.coefficients;
    (1..c.len().saturating_sub(1))
        .find(|&i| inside(r.lags[i]) && c[i] > c[i - 1] && c[i] > c[i + 1] && c[i] >= threshold)
        .map(|i| r.lags[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(values: Vec<f64>) -> StccResult {
        let lags = (0..values.len()).map(|k| k as f64 * 0.01).collect();
        StccResult { lags, coefficients: values, t: 0.0, window: 5.0 }
    }

    #[test]
    fn triangle_apex() {
        let v: Vec<f64> = (0..51).map(|k| 1.0 - (k as f64 - 12.0).abs() / 20.0).collect();
        assert_eq!(first_dominant_peak(&profile(v), &PeakRule::default()), Some(0.12));
    }

    #[test]
    fn equal_peaks_pick_smaller_lag() {
        let v: Vec<f64> = (0..51)
            .map(|k| {
                let l = k as f64 * 0.01;
                (-(l - 0.03f64).powi(2) / 2e-4).exp() + (-(l - 0.11f64).powi(2) / 2e-4).exp()
            })
            .collect();
        assert_eq!(first_dominant_peak(&profile(v), &PeakRule::default()), Some(0.03));
    }

    #[test]
    fn early_small_peak_ignored_below_prominence() {
        let v: Vec<f64> = (0..51)
            .map(|k| {
                let l = k as f64 * 0.01;
                0.5 * (-(l - 0.03f64).powi(2) / 2e-4).exp() + (-(l - 0.2f64).powi(2) / 2e-4).exp()
            })
            .collect();
        let p = first_dominant_peak(&profile(v), &PeakRule::default()).unwrap();
        assert!((p - 0.2).abs() < 1e-12);
    }

    #[test]
    fn monotone_profile_has_no_peak() {
        let v: Vec<f64> = (0..51).map(|k| 1.0 - k as f64 * 0.01).collect();
        assert_eq!(first_dominant_peak(&profile(v), &PeakRule::default()), None);
    }

    #[test]
    fn search_range_respected() {
        let v: Vec<f64> = (0..51).map(|k| 1.0 - (k as f64 - 40.0).abs() / 50.0).collect();
        let rule = PeakRule { search: [0.0, 0.3], prominence: 0.8 };
        assert_eq!(first_dominant_peak(&profile(v), &rule), None);
    }
}
