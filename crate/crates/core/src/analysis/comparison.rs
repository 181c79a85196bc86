use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Relative deviation above which a recomputed index is footnoted.
pub const INDEX_TOLERANCE: f64 = 0.02;

/// Figure of merit `DE(%) / (dark rate [c/s] * jitter [ps])`.
pub fn performance_index(de_percent: f64, dark_cps: f64, jitter_ps: f64) -> Result<f64, ModelError> {
    if !(dark_cps > 0.0) {
        return Err(ModelError::Domain {
            name: "dark_cps",
            value: dark_cps,
            domain: "(0, inf)",
        });
    }
    if !(jitter_ps > 0.0) {
        return Err(ModelError::Domain {
            name: "jitter_ps",
            value: jitter_ps,
            domain: "(0, inf)",
        });
    }
    if !(de_percent >= 0.0) {
        return Err(ModelError::Domain {
            name: "de_percent",
            value: de_percent,
            domain: "[0, inf)",
        });
    }
    Ok(de_percent / (dark_cps * jitter_ps))
}

/// One detector in the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonRow {
    pub name: String,
    pub de_percent: f64,
    pub dark_cps: f64,
    pub jitter_ps: f64,
    /// After-pulse probability; absent where it does not apply.
    #[serde(default)]
    pub after_pulse: Option<f64>,
    pub count_rate_hz: f64,
    pub operation_mode: String,
    /// Published index in units of 1e-6, for comparison only.
    #[serde(default)]
    pub printed_index_e6: Option<f64>,
}

impl ComparisonRow {
    pub fn performance_index(&self) -> Result<f64, ModelError> {
        performance_index(self.de_percent, self.dark_cps, self.jitter_ps)
    }

    /// Recomputed index divided by the printed one, minus one.
    pub fn deviation(&self) -> Result<Option<f64>, ModelError> {
        let index = self.performance_index()? * 1e6;
        Ok(self.printed_index_e6.map(|p| index / p - 1.0))
    }
}

/// The built-in comparison of 1550 nm detectors.
pub fn comparison_table() -> Vec<ComparisonRow> {
    let row = |name: &str, de, dark, jitter, ap, rate, mode: &str, printed| ComparisonRow {
        name: name.to_string(),
        de_percent: de,
        dark_cps: dark,
        jitter_ps: jitter,
        after_pulse: ap,
        count_rate_hz: rate,
        operation_mode: mode.to_string(),
        printed_index_e6: Some(printed),
    };
    vec![
        row("InGaAs/InP APD [1] (sinusoidally gated)", 5.1, 7600.0, 100.0, Some(0.023), 20e6, "Gated (1.5 GHz)", 6.7),
        row("InGaAs/InP APD [2] (self-differencing)", 10.8, 2900.0, 55.0, Some(0.0616), 100e6, "Gated (1.25 GHz)", 6.8),
        row("SFG Si APD [3]", 6.0, 10000.0, 75.0, None, 100e6, "Continuous (PPLN up-conversion)", 8.0),
        row("SSPD", 2.0, 30.0, 100.0, Some(0.0), 66e6, "Continuous", 660.0),
    ]
}

/// A comparison row with its recomputed index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub row: ComparisonRow,
    pub index_e6: f64,
    pub deviation: Option<f64>,
    /// Footnote number when the recomputed index disagrees with the printed one.
    pub footnote: Option<usize>,
}

/// Recomputed comparison table with discrepancy footnotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub entries: Vec<ComparisonEntry>,
    pub footnotes: Vec<String>,
}

impl ComparisonTable {
    pub fn new(rows: &[ComparisonRow]) -> Result<Self, ModelError> {
        let mut entries = Vec::with_capacity(rows.len());
        let mut footnotes = Vec::new();
        for row in rows {
            let index_e6 = row.performance_index()? * 1e6;
            let deviation = row.deviation()?;
            let mut footnote = None;
            if let (Some(d), Some(printed)) = (deviation, row.printed_index_e6) {
                if d.abs() > INDEX_TOLERANCE {
                    footnotes.push(format!(
                        "{}: DE {}% / ({} c/s x {} ps) gives {:.1}e-6, the printed value is {}e-6 \
                         (ratio {:.2}); the recomputed value is reported",
                        row.name,
                        row.de_percent,
                        row.dark_cps,
                        row.jitter_ps,
                        index_e6,
                        printed,
                        index_e6 / printed
                    ));
                    footnote = Some(footnotes.len());
                }
            }
            entries.push(ComparisonEntry {
                row: row.clone(),
                index_e6,
                deviation,
                footnote,
            });
        }
        Ok(Self { entries, footnotes })
    }

    pub fn entry(&self, name_prefix: &str) -> Option<&ComparisonEntry> {
        self.entries.iter().find(|e| e.row.name.starts_with(name_prefix))
    }

    /// CSV with header
    /// `name,de_percent,dark_cps,jitter_ps,after_pulse,count_rate_hz,operation_mode,performance_index_e6,printed_index_e6,deviation,footnote`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "name",
            "de_percent",
            "dark_cps",
            "jitter_ps",
            "after_pulse",
            "count_rate_hz",
            "operation_mode",
            "performance_index_e6",
            "printed_index_e6",
            "deviation",
            "footnote",
        ])?;
        let opt = |v: Option<f64>, prec: usize| v.map_or(String::new(), |x| format!("{x:.prec$}"));
        for e in &self.entries {
            let r = &e.row;
            w.write_record([
                r.name.clone(),
                r.de_percent.to_string(),
                r.dark_cps.to_string(),
                r.jitter_ps.to_string(),
                r.after_pulse.map_or(String::new(), |x| x.to_string()),
                r.count_rate_hz.to_string(),
                r.operation_mode.clone(),
                format!("{:.2}", e.index_e6),
                r.printed_index_e6.map_or(String::new(), |x| x.to_string()),
                opt(e.deviation, 4),
                e.footnote.map_or(String::new(), |n| format!("[{n}]")),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Footnotes as printable lines, `[n] text`.
    pub fn footnote_lines(&self) -> Vec<String> {
        self.footnotes
            .iter()
            .enumerate()
            .map(|(i, f)| format!("[{}] {f}", i + 1))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rows() {
        let sspd = performance_index(2.0, 30.0, 100.0).unwrap();
        assert!((sspd - 2.0 / 3000.0).abs() < 1e-15);
        let apd = performance_index(5.1, 7600.0, 100.0).unwrap() * 1e6;
        assert!((apd / 6.7 - 1.0).abs() < 0.02, "{apd}");
        assert_eq!(performance_index(0.0, 5.0, 5.0).unwrap(), 0.0);
        assert!(performance_index(1.0, 0.0, 5.0).is_err());
        assert!(performance_index(1.0, 5.0, 0.0).is_err());
    }

    #[test]
    fn only_the_self_differencing_row_is_footnoted() {
        let table = ComparisonTable::new(&comparison_table()).unwrap();
        assert_eq!(table.footnotes.len(), 1);
        let flagged = table.entry("InGaAs/InP APD [2]").unwrap();
        assert_eq!(flagged.footnote, Some(1));
        assert!((flagged.index_e6 - 67.71).abs() < 0.01, "{}", flagged.index_e6);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(4).unwrap().starts_with("SSPD,"));
    }
}
