use super::AnalysisError;
use crate::series::TimeSeries;

/// Root mean square without mean removal.
pub fn rms(series: &TimeSeries) -> Result<f64, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::Empty(series.label.clone()));
    }
    let sum_sq: f64 = series.samples.iter().map(|x| x * x).sum();
    Ok((sum_sq / series.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeros_constants_and_sines() {
        assert_eq!(rms(&TimeSeries::new("z", 0.1, vec![0.0; 10])).unwrap(), 0.0);
        assert_eq!(rms(&TimeSeries::new("c", 0.1, vec![-2.5; 7])).unwrap(), 2.5);
        let n = 1000;
        let s: Vec<f64> = (0..n).map(|k| (2.0 * PI * 5.0 * k as f64 / n as f64).sin()).collect();
        let r = rms(&TimeSeries::new("s", 1e-3, s)).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(rms(&TimeSeries::new("e", 0.1, vec![])).is_err());
    }

    #[test]
    fn scales_linearly() {
        let s = TimeSeries::new("x", 0.1, vec![1.0, -3.0, 2.0]);
        let a = rms(&s).unwrap();
        let b = rms(&s.scaled(4.0)).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12);
    }
}
