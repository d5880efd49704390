use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::series::TimeSeries;

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    /// Hz, from 0 to Nyquist.
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub segment_len: usize,
    pub overlap: f64,
    pub segments: usize,
}

/// Welch estimate: Hann-tapered, mean-removed segments with fractional
/// `overlap`, periodograms averaged.
pub fn power_spectrum(series: &TimeSeries, segment_len: usize, overlap: f64) -> Result<PowerSpectrum, AnalysisError> {
    if segment_len < 2 {
        return Err(AnalysisError::InvalidInput("segment length must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(AnalysisError::InvalidInput(format!("overlap {overlap} outside [0, 1)")));
    }
    if segment_len > series.len() {
        return Err(AnalysisError::InvalidInput(format!(
            "segment length {segment_len} exceeds series length {}",
            series.len()
        )));
    }
    if series.samples.iter().any(|x| !x.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!("series `{}` has non-finite samples", series.label)));
    }
    let hop = ((segment_len as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let window: Vec<f64> =
        (0..segment_len).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / segment_len as f64).cos()).collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let fs = 1.0 / series.dt;

    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let n_bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut segments = 0;
    let mut start = 0;
    while start + segment_len <= series.len() {
        let seg = &series.samples[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }

    let scale = 1.0 / (fs * window_power * segments as f64);
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let edge = k == 0 || (segment_len % 2 == 0 && k == n_bins - 1);
            a * scale * if edge { 1.0 } else { 2.0 }
        })
        .collect();
    let frequencies = (0..n_bins).map(|k| k as f64 * fs / segment_len as f64).collect();
    Ok(PowerSpectrum { frequencies, power, segment_len, overlap, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdde::NoiseStream;

    fn white(n: usize, seed: u64) -> TimeSeries {
        let mut g = NoiseStream::new(seed, 0);
        TimeSeries::new("w", 0.01, (0..n).map(|_| g.next_gaussian()).collect())
    }

    #[test]
    fn sinusoid_has_one_dominant_bin() {
        let n = 4096;
        let f0 = 64.0 / 1024.0 / 0.01;
        let s: Vec<f64> = (0..n).map(|k| (2.0 * PI * f0 * k as f64 * 0.01).sin()).collect();
        let sp = power_spectrum(&TimeSeries::new("s", 0.01, s), 1024, 0.5).unwrap();
        let (imax, _) = sp.power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((sp.frequencies[imax] - f0).abs() < 1e-9);
        let far: f64 = sp.power.iter().enumerate().filter(|(k, _)| k.abs_diff(imax) > 2).map(|(_, p)| *p).fold(0.0, f64::max);
        assert!(far < 1e-6 * sp.power[imax]);
    }

    #[test]
    fn white_noise_density_matches_variance() {
        // unit variance at fs = 100 Hz: one-sided density 2/fs
        let sp = power_spectrum(&white(1024 * 101, 3), 2048, 0.5).unwrap();
        let inner = &sp.power[10..1000];
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((mean - 0.02).abs() < 0.001, "{mean}");
        assert!(sp.power.iter().all(|p| *p >= 0.0));
        assert!(sp.frequencies.windows(2).all(|w| w[1] > w[0]));
        assert!((sp.frequencies.last().unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn segment_count_follows_overlap() {
        let sp = power_spectrum(&white(1000, 1), 200, 0.5).unwrap();
        assert_eq!(sp.segments, 9);
        let sp = power_spectrum(&white(1000, 1), 200, 0.0).unwrap();
        assert_eq!(sp.segments, 5);
    }

    #[test]
    fn degenerate_segmentation_rejected() {
        let s = white(100, 1);
        assert!(power_spectrum(&s, 1, 0.5).is_err());
        assert!(power_spectrum(&s, 101, 0.5).is_err());
        assert!(power_spectrum(&s, 50, 1.0).is_err());
    }
}
