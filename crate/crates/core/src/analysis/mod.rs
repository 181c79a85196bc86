//! Characterization and reporting.
//!
//! The detector comparison table and its figure of merit, simulated TCSPC
//! jitter measurements with FWHM extraction, bias sweeps, statistics over a
//! batch of like devices, and CSV and gnuplot export of the resulting curves.

mod characterize;
mod comparison;
mod tcspc;

pub use characterize::{
    bias_sweep, device_set_stats, gnuplot_script, write_sweep_csv, DeviceSetStats, PlotSeries,
    PlotSpec, Spread, SweepRow,
};
pub use comparison::{
    comparison_table, performance_index, ComparisonEntry, ComparisonRow, ComparisonTable,
    INDEX_TOLERANCE,
};
pub use tcspc::{fwhm, run_jitter, tcspc_histogram, Histogram, JitterRun};
