use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::series::TimeSeries;

/// Bins with fewer counts in either histogram are not reported.
pub const RATIO_MIN_COUNT: u64 = 100;

/// The shared grid spans `±q` with `q` this quantile of the pooled `|v|`.
const RANGE_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRatio {
    /// Half-width of the shared grid.
    pub range: f64,
    pub bin_width: f64,
    /// Supported bins only.
    pub centers: Vec<f64>,
    pub ratio: Vec<f64>,
    pub density_coupled: Vec<f64>,
    pub density_single: Vec<f64>,
    pub counts_coupled: Vec<u64>,
    pub counts_single: Vec<u64>,
}

impl DensityRatio {
    /// Mean ratio over supported bins with `|center| <= fraction * range`.
    pub fn central_mean(&self, fraction: f64) -> Option<f64> {
        let sel: Vec<f64> = self
            .centers
            .iter()
            .zip(&self.ratio)
            .filter(|(c, _)| c.abs() <= fraction * self.range + 1e-12 * self.range)
            .map(|(_, r)| *r)
            .collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    }
}

fn quantile_abs(values: &mut [f64], q: f64) -> f64 {
    let k = ((values.len() - 1) as f64 * q).round() as usize;
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

/// Ratio of the histogram densities of `coupled` and `single` on one
/// symmetric grid of `bins` bins.
pub fn velocity_density_ratio(
    coupled: &TimeSeries,
    single: &TimeSeries,
    bins: usize,
) -> Result<DensityRatio, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::InvalidInput("need at least one bin".into()));
    }
    for s in [coupled, single] {
        if s.is_empty() {
            return Err(AnalysisError::Empty(s.label.clone()));
        }
        if s.samples.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::InvalidInput(format!("series `{}` has non-finite samples", s.label)));
        }
    }
    let mut pooled: Vec<f64> = coupled.samples.iter().chain(&single.samples).map(|v| v.abs()).collect();
    let range = quantile_abs(&mut pooled, RANGE_QUANTILE);
    if range <= 0.0 {
        return Err(AnalysisError::NoOverlap);
    }
    let width = 2.0 * range / bins as f64;
    let histogram = |s: &TimeSeries| {
        let mut h = vec![0u64; bins];
        for v in &s.samples {
            if v.abs() <= range {
                let k = (((v + range) / width) as usize).min(bins - 1);
                h[k] += 1;
            }
        }
        h
    };
    let hc = histogram(coupled);
    let hs = histogram(single);
    let nc = coupled.len() as f64;
    let ns = single.len() as f64;
    let mut out = DensityRatio {
        range,
        bin_width: width,
        centers: vec![],
        ratio: vec![],
        density_coupled: vec![],
        density_single: vec![],
        counts_coupled: vec![],
        counts_single: vec![],
    };
    for k in 0..bins {
        if hc[k] < RATIO_MIN_COUNT || hs[k] < RATIO_MIN_COUNT {
            continue;
        }
        let dc = hc[k] as f64 / (nc * width);
        let ds = hs[k] as f64 / (ns * width);
        out.centers.push(-range + (k as f64 + 0.5) * width);
        out.ratio.push(dc / ds);
        out.density_coupled.push(dc);
        out.density_single.push(ds);
        out.counts_coupled.push(hc[k]);
        out.counts_single.push(hs[k]);
    }
    if out.centers.is_empty() {
        return Err(AnalysisError::NoOverlap);
    }
    Ok(out)
}
