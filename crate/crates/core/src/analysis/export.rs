//! CSV tables: one header row, one record per line.

use std::io::Write;

use super::{DensityRatio, EnsembleRms, PeakDensity, PeakSeries, PowerSpectrum, SlopeFit, StccResult, TrialReport};
use crate::series::TimeSeries;
use crate::stability::SweepRow;

/// Anything that renders as one CSV table.
pub trait CsvTable {
    fn header(&self) -> Vec<String>;
    fn records(&self) -> Vec<Vec<String>>;

    fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in self.records() {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn s(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(s).unwrap_or_default()
}

fn head(names: &[&str]) -> Vec<String> {
    names.iter().map(|n| n.to_string()).collect()
}

/// Columns `t` then one column per series; series must share `dt`. Shorter
/// series leave trailing cells empty.
pub struct SeriesTable<'a>(pub &'a [TimeSeries]);

impl CsvTable for SeriesTable<'_> {
    fn header(&self) -> Vec<String> {
        std::iter::once("t".to_string()).chain(self.0.iter().map(|s| s.label.clone())).collect()
    }

    fn records(&self) -> Vec<Vec<String>> {
        let n = self.0.iter().map(TimeSeries::len).max().unwrap_or(0);
        let dt = self.0.first().map_or(1.0, |s| s.dt);
        (0..n)
            .map(|k| {
                std::iter::once(s(k as f64 * dt))
                    .chain(self.0.iter().map(|x| x.samples.get(k).map(|v| s(*v)).unwrap_or_default()))
                    .collect()
            })
            .collect()
    }
}

impl CsvTable for PowerSpectrum {
    fn header(&self) -> Vec<String> {
        head(&["frequency", "power"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.frequencies.iter().zip(&self.power).map(|(f, p)| vec![s(*f), s(*p)]).collect()
    }
}

impl CsvTable for SlopeFit {
    fn header(&self) -> Vec<String> {
        head(&[
            "slope_low",
            "slope_high",
            "breakpoint",
            "residual_low",
            "residual_high",
            "single_slope",
            "single_residual",
            "improvement",
            "second_regime",
            "band_lo",
            "band_hi",
        ])
    }

    fn records(&self) -> Vec<Vec<String>> {
        vec![vec![
            s(self.slope_low),
            s(self.slope_high),
            s(self.breakpoint),
            s(self.residual_low),
            s(self.residual_high),
            s(self.single_slope),
            s(self.single_residual),
            s(self.improvement),
            self.second_regime.to_string(),
            s(self.band[0]),
            s(self.band[1]),
        ]]
    }
}

impl CsvTable for DensityRatio {
    fn header(&self) -> Vec<String> {
        head(&["velocity", "ratio", "density_coupled", "density_single", "count_coupled", "count_single"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        (0..self.centers.len())
            .map(|k| {
                vec![
                    s(self.centers[k]),
                    s(self.ratio[k]),
                    s(self.density_coupled[k]),
                    s(self.density_single[k]),
                    self.counts_coupled[k].to_string(),
                    self.counts_single[k].to_string(),
                ]
            })
            .collect()
    }
}

impl CsvTable for StccResult {
    fn header(&self) -> Vec<String> {
        head(&["lag", "coefficient"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.lags.iter().zip(&self.coefficients).map(|(l, c)| vec![s(*l), s(*c)]).collect()
    }
}

impl CsvTable for PeakSeries {
    fn header(&self) -> Vec<String> {
        head(&["t", "tau_hat"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.starts.iter().zip(&self.peaks).map(|(t, p)| vec![s(*t), opt(*p)]).collect()
    }
}

impl CsvTable for PeakDensity {
    fn header(&self) -> Vec<String> {
        head(&["lag_lo", "lag_hi", "count", "density"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        (0..self.edges.len())
            .map(|k| {
                vec![s(self.edges[k]), s(self.edges[k] + self.bin_width), self.counts[k].to_string(), s(self.density[k])]
            })
            .collect()
    }
}

impl CsvTable for EnsembleRms {
    fn header(&self) -> Vec<String> {
        head(&["seed", "rms", "log10_rms", "diverged"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.seeds
            .iter()
            .zip(&self.rms)
            .map(|(seed, r)| vec![seed.to_string(), opt(*r), opt(r.map(f64::log10)), r.is_none().to_string()])
            .collect()
    }
}

impl CsvTable for [SweepRow] {
    fn header(&self) -> Vec<String> {
        head(&["beta", "lambda1", "std_error", "error"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| vec![s(r.beta), opt(r.lambda1), opt(r.std_error), r.error.clone().unwrap_or_default()])
            .collect()
    }
}

/// Per-trial rows of a report.
pub struct TrialRows<'a>(pub &'a TrialReport);
/// Per-subject averages of a report.
pub struct SubjectRows<'a>(pub &'a TrialReport);
/// Group statistics of a report.
pub struct GroupRows<'a>(pub &'a TrialReport);

impl CsvTable for TrialRows<'_> {
    fn header(&self) -> Vec<String> {
        head(&["trial", "subject", "mode", "stick", "tau_hat", "rms", "duration"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.0
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.trial.clone(),
                    r.subject.clone(),
                    r.mode.to_string(),
                    r.stick.to_string(),
                    opt(r.tau_hat),
                    s(r.rms),
                    s(r.duration),
                ]
            })
            .collect()
    }
}

impl CsvTable for SubjectRows<'_> {
    fn header(&self) -> Vec<String> {
        head(&["subject", "mode", "trials", "tau_hat", "rms"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.0
            .subjects
            .iter()
            .map(|a| vec![a.subject.clone(), a.mode.to_string(), a.trials.to_string(), opt(a.tau_hat), s(a.rms)])
            .collect()
    }
}

impl CsvTable for GroupRows<'_> {
    fn header(&self) -> Vec<String> {
        head(&["group", "trials", "tau_mean", "tau_std", "rms_mean", "rms_std"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.0
            .groups
            .iter()
            .map(|g| {
                vec![
                    g.group.clone(),
                    g.trials.to_string(),
                    opt(g.tau_mean),
                    opt(g.tau_std),
                    s(g.rms_mean),
                    opt(g.rms_std),
                ]
            })
            .collect()
    }
}
