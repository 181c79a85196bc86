use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detector::{
    critical_current_density, dark_rate_at_bias, efficiency_at_bias, DeviceProfile,
};
use crate::error::{ModelError, Result};

/// One point of a bias sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub bias_ratio: f64,
    pub de: f64,
    pub dark_cps: f64,
}

/// Efficiency and dark rate at every bias of the grid.
pub fn bias_sweep(
    profile: &DeviceProfile,
    grid: &[f64],
    wavelength_nm: f64,
) -> Result<Vec<SweepRow>, ModelError> {
    grid.iter()
        .map(|&b| {
            Ok(SweepRow {
                bias_ratio: b,
                de: efficiency_at_bias(profile, b, wavelength_nm)?,
                dark_cps: dark_rate_at_bias(profile, b)?,
            })
        })
        .collect()
}

/// CSV with header `bias_ratio,de,dark_cps`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bias_ratio", "de", "dark_cps"])?;
    for r in rows {
        w.write_record([
            format!("{:.4}", r.bias_ratio),
            format!("{:.6e}", r.de),
            format!("{:.6e}", r.dark_cps),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean, extremes and coefficient of variation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation over the mean.
    pub cv: f64,
    /// Largest `|x / mean - 1|`.
    pub max_relative_deviation: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyInput("no values"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let (cv, dev) = if mean != 0.0 {
            (
                var.sqrt() / mean.abs(),
                values.iter().map(|x| (x / mean - 1.0).abs()).fold(0.0, f64::max),
            )
        } else {
            (0.0, 0.0)
        };
        Ok(Self {
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            cv,
            max_relative_deviation: dev,
        })
    }
}

/// Batch statistics of like devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSetStats {
    pub devices: usize,
    pub wavelength_nm: f64,
    pub de: Spread,
    /// Critical current density in A/m^2.
    pub j_c: Spread,
    pub de_floor: f64,
    /// Every device exceeds `de_floor`.
    pub all_above_floor: bool,
    pub jc_tolerance: f64,
    /// Every J_c lies within `jc_tolerance` of the batch mean.
    pub jc_within_tolerance: bool,
}

/// Spread of efficiency at each device's operating bias and of J_c.
pub fn device_set_stats(
    profiles: &[DeviceProfile],
    wavelength_nm: f64,
    de_floor: f64,
    jc_tolerance: f64,
) -> Result<DeviceSetStats, ModelError> {
    if profiles.is_empty() {
        return Err(ModelError::EmptyInput("device set is empty"));
    }
    let mut de = Vec::with_capacity(profiles.len());
    let mut jc = Vec::with_capacity(profiles.len());
    for p in profiles {
        de.push(efficiency_at_bias(p, p.operating_bias(), wavelength_nm)?);
        jc.push(critical_current_density(p.i_c_ua, p.wire_width_nm, p.thickness_nm)?);
    }
    let de = Spread::of(&de)?;
    let j_c = Spread::of(&jc)?;
    Ok(DeviceSetStats {
        devices: profiles.len(),
        wavelength_nm,
        de,
        j_c,
        de_floor,
        all_above_floor: de.min > de_floor,
        jc_tolerance,
        jc_within_tolerance: j_c.max_relative_deviation <= jc_tolerance,
    })
}

/// One curve of a gnuplot script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    /// 1-based CSV column plotted against column 1.
    pub column: usize,
    pub title: String,
    /// Plot on the right-hand axis.
    pub y2: bool,
}

/// Layout of a gnuplot script for a CSV curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub y2label: Option<String>,
    pub logscale_y: bool,
    pub logscale_y2: bool,
    pub series: Vec<PlotSeries>,
}

impl PlotSpec {
    /// Efficiency and dark rate against bias, dark rate on a log right axis.
    pub fn bias_sweep(device: &str, wavelength_nm: f64) -> Self {
        Self {
            title: format!("{device} at {wavelength_nm} nm"),
            xlabel: "I_b / I_c".into(),
            ylabel: "system DE".into(),
            y2label: Some("dark count rate (c/s)".into()),
            logscale_y: true,
            logscale_y2: true,
            series: vec![
                PlotSeries { column: 2, title: "DE".into(), y2: false },
                PlotSeries { column: 3, title: "dark".into(), y2: true },
            ],
        }
    }

    /// Counts against time for a TCSPC histogram.
    pub fn histogram(device: &str) -> Self {
        Self {
            title: format!("{device} timing histogram"),
            xlabel: "time (ps)".into(),
            ylabel: "counts".into(),
            y2label: None,
            logscale_y: false,
            logscale_y2: false,
            series: vec![PlotSeries { column: 2, title: "counts".into(), y2: false }],
        }
    }
}

/// A gnuplot script that plots `csv_file` (comma separated, one header line).
pub fn gnuplot_script(csv_file: &str, spec: &PlotSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title \"{}\"", spec.title);
    let _ = writeln!(s, "set xlabel \"{}\"", spec.xlabel);
    let _ = writeln!(s, "set ylabel \"{}\"", spec.ylabel);
    if spec.logscale_y {
        let _ = writeln!(s, "set logscale y");
    }
    if let Some(label) = &spec.y2label {
        let _ = writeln!(s, "set y2label \"{label}\"");
        let _ = writeln!(s, "set y2tics");
        if spec.logscale_y2 {
            let _ = writeln!(s, "set logscale y2");
        }
    }
    let curves: Vec<String> = spec
        .series
        .iter()
        .map(|c| {
            format!(
                "'{csv_file}' using 1:{} with linespoints title \"{}\" axes x1{}",
                c.column,
                c.title,
                if c.y2 { "y2" } else { "y1" }
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::tests::preset_a;

    #[test]
    fn sweep_at_operating_point_and_zero() {
        let a = preset_a();
        let rows = bias_sweep(&a, &[0.9, 0.0], 1550.0).unwrap();
        assert!((rows[0].de - 0.026).abs() < 1e-12);
        assert!((rows[0].dark_cps - 100.0).abs() < 1e-9);
        assert_eq!(rows[1].de, 0.0);
        assert_eq!(rows[1].dark_cps, dark_rate_at_bias(&a, 0.0).unwrap());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("bias_ratio,de,dark_cps\n"));
    }

    #[test]
    fn single_device_has_no_spread() {
        let stats = device_set_stats(&[preset_a()], 1550.0, 0.01, 0.05).unwrap();
        assert_eq!(stats.de.cv, 0.0);
        assert_eq!(stats.j_c.cv, 0.0);
        assert!(stats.jc_within_tolerance);
        assert!(device_set_stats(&[], 1550.0, 0.01, 0.05).is_err());
    }

    #[test]
    fn like_width_set_within_five_percent() {
        let base = preset_a();
        let set: Vec<_> = [0.96, 1.0, 1.04, 0.98]
            .iter()
            .map(|f| {
                let mut p = base.clone();
                p.i_c_ua *= f;
                p
            })
            .collect();
        let stats = device_set_stats(&set, 1550.0, 0.01, 0.05).unwrap();
        assert!(stats.jc_within_tolerance);
        assert!(stats.j_c.cv <= 0.05);
    }

    #[test]
    fn script_names_the_file() {
        let s = gnuplot_script("sweep.csv", &PlotSpec::bias_sweep("A", 1550.0));
        assert!(s.contains("'sweep.csv' using 1:2"));
        assert!(s.contains("axes x1y2"));
    }
}
