//! `sspd`: batch front end of the detector and QKD link simulator.
//!
//! Every run loads one configuration document (the built-in calibrated
//! defaults unless `--config` is given), applies the command-line overrides,
//! writes its outputs to `--out`, and leaves a `manifest.json` beside them
//! that is sufficient to repeat the run exactly. Failures are reported as a
//! JSON object on stderr with a nonzero exit status.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use sspd_core::analysis::{
    bias_sweep, device_set_stats, gnuplot_script, run_jitter, write_sweep_csv, ComparisonTable,
    PlotSpec,
};
use sspd_core::config::{default_config_source, device_set_source, parse_config, Config};
use sspd_core::qkd::{bb84_session, bbm92_session};
use sspd_core::{ConfigError, Error};

/// Acceptance band of the extracted jitter FWHM around the device value, ps.
const JITTER_TOLERANCE_PS: f64 = 5.0;

#[derive(Parser)]
#[command(name = "sspd", version, about = "Seeded SSPD and QKD link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Serialize)]
struct Common {
    /// Configuration document (TOML); the built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Session seed; overrides the document's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Simulated slots (bb84, bbm92) or collected clicks (jitter).
    #[arg(long, global = true)]
    slots: Option<u64>,
    /// Device preset replacing the job's device.
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Efficiency and dark-rate bias sweep plus device-set statistics.
    Characterize,
    /// Simulated TCSPC jitter measurement with FWHM extraction.
    Jitter,
    /// Decoy-state BB84 session.
    Bb84,
    /// Entanglement-based BBM92 session.
    Bbm92,
    /// Detector comparison table with recomputed performance indices.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Characterize => "characterize",
            Command::Jitter => "jitter",
            Command::Bb84 => "bb84",
            Command::Bbm92 => "bbm92",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot {action} `{path}`: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(Error::Config(e)) | CliError::Config(e) => e.kind(),
            CliError::Core(Error::Model(_)) => "model",
            CliError::Core(_) => "output",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'static str,
    config_path: Option<&'a Path>,
    config_text: &'a str,
    seed: u64,
    output_directory: &'a Path,
    overrides: Vec<String>,
    defaults_applied: &'a [String],
    outputs: Vec<String>,
    summary: serde_json::Value,
}

struct Run<'a> {
    common: &'a Common,
    config: Config,
    seed: u64,
    overrides: Vec<String>,
    outputs: Vec<String>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.common.out.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            action: "write",
            path,
            source,
        })?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn section<T: Clone>(&self, value: &Option<T>, name: &str) -> CliResult<T> {
        value
            .clone()
            .ok_or_else(|| CliError::Usage(format!("the configuration has no [{name}] section")))
    }

    fn preset(&mut self) -> CliResult<Option<sspd_core::detector::DeviceProfile>> {
        match &self.common.preset {
            None => Ok(None),
            Some(id) => {
                let dev = self.config.device(id)?.clone();
                self.overrides.push(format!("preset = {id}"));
                Ok(Some(dev))
            }
        }
    }

    fn reject_slots(&self, command: Command) -> CliResult<()> {
        if self.common.slots.is_some() {
            return Err(CliError::Usage(format!("--slots does not apply to `{}`", command.name())));
        }
        Ok(())
    }
}

fn json_text<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Core(Error::from(e)))
}

fn characterize(run: &mut Run) -> CliResult<serde_json::Value> {
    run.reject_slots(Command::Characterize)?;
    let mut job = run.section(&run.config.characterize, "characterize")?;
    if let Some(dev) = run.preset()? {
        job.device = dev;
    }
    let rows = bias_sweep(&job.device, &job.bias_grid, job.wavelength_nm).map_err(Error::from)?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    run.write("sweep.csv", csv)?;
    run.write(
        "sweep.gp",
        gnuplot_script("sweep.csv", &PlotSpec::bias_sweep(&job.device.id, job.wavelength_nm)),
    )?;
    let set = match &run.config.device_set {
        Some(s) => s.clone(),
        None => parse_config(device_set_source())?
            .device_set
            .expect("built-in device set"),
    };
    let stats = device_set_stats(&set.profiles, set.wavelength_nm, set.de_floor, set.jc_tolerance)
        .map_err(Error::from)?;
    run.write("device_set.json", json_text(&json!({ "id": set.id, "stats": stats }))?)?;
    println!(
        "{}: {} bias points at {} nm written to sweep.csv",
        job.device.id,
        rows.len(),
        job.wavelength_nm
    );
    println!(
        "device set {}: {} devices, DE {:.3}..{:.3} (mean {:.4}, CV {:.3}), all above {}: {}; J_c CV {:.3}, within +/-{}%: {}",
        set.id,
        stats.devices,
        stats.de.min,
        stats.de.max,
        stats.de.mean,
        stats.de.cv,
        stats.de_floor,
        stats.all_above_floor,
        stats.j_c.cv,
        stats.jc_tolerance * 100.0,
        stats.jc_within_tolerance
    );
    Ok(json!({ "device": job.device.id, "points": rows.len(), "device_set": stats }))
}

fn jitter(run: &mut Run) -> CliResult<serde_json::Value> {
    let mut job = run.section(&run.config.jitter, "jitter")?;
    if let Some(dev) = run.preset()? {
        job.device = dev;
    }
    if let Some(n) = run.common.slots {
        job.clicks = n;
        run.overrides.push(format!("jitter.clicks = {n}"));
    }
    let result = run_jitter(&job, run.seed)?;
    let target = result.device_fwhm_ps;
    let pass = (result.fwhm_ps - target).abs() <= JITTER_TOLERANCE_PS;
    let line = format!(
        "{}: FWHM {:.1} ps from {} clicks in {} ps bins; expected {} ± {} ps: {}",
        result.device,
        result.fwhm_ps,
        result.clicks,
        result.bin_width_ps,
        target,
        JITTER_TOLERANCE_PS,
        if pass { "PASS" } else { "FAIL" }
    );
    let mut csv = Vec::new();
    result.histogram.write_csv(&mut csv)?;
    run.write("histogram.csv", csv)?;
    run.write("histogram.gp", gnuplot_script("histogram.csv", &PlotSpec::histogram(&result.device)))?;
    let summary = json!({
        "device": result.device,
        "sync_rate_hz": result.sync_rate_hz,
        "clicks": result.clicks,
        "photon_clicks": result.photon_clicks,
        "dark_clicks": result.dark_clicks,
        "bin_width_ps": result.bin_width_ps,
        "fwhm_ps": result.fwhm_ps,
        "device_fwhm_ps": target,
        "within_tolerance": pass,
        "summary": line,
    });
    run.write("jitter.json", json_text(&summary)?)?;
    println!("{line}");
    Ok(summary)
}

fn bb84(run: &mut Run) -> CliResult<serde_json::Value> {
    let mut job = run.section(&run.config.bb84, "bb84")?;
    if let Some(dev) = run.preset()? {
        job.device = dev;
    }
    if let Some(n) = run.common.slots {
        job.slots = n;
        run.overrides.push(format!("bb84.slots = {n}"));
    }
    let report = bb84_session(&job, run.seed)?;
    run.write("report.json", json_text(&report)?)?;
    println!(
        "bb84: {} slots, sifted {:.3} kbps, QBER {}, secure {:.3} kbps",
        report.slots,
        report.sifted_rate.per_second / 1e3,
        report.qber.map_or("n/a".to_string(), |q| format!("{:.2}%", q * 100.0)),
        report.secure_rate.per_second / 1e3
    );
    Ok(json!({
        "sifted_rate_bps": report.sifted_rate.per_second,
        "qber": report.qber,
        "secure_rate_bps": report.secure_rate.per_second,
    }))
}

fn bbm92(run: &mut Run) -> CliResult<serde_json::Value> {
    let mut job = run.section(&run.config.bbm92, "bbm92")?;
    if let Some(dev) = run.preset()? {
        job.device = dev;
    }
    if let Some(n) = run.common.slots {
        job.slots = n;
        run.overrides.push(format!("bbm92.slots = {n}"));
    }
    let report = bbm92_session(&job, run.seed)?;
    run.write("report.json", json_text(&report)?)?;
    println!(
        "bbm92: {} windows, sifted {:.3} bps, QBER {}, secure {:.3} bps",
        report.slots,
        report.sifted_rate.per_second,
        report.qber.map_or("n/a".to_string(), |q| format!("{:.2}%", q * 100.0)),
        report.secure_rate.per_second
    );
    Ok(json!({
        "sifted_rate_bps": report.sifted_rate.per_second,
        "qber": report.qber,
        "secure_rate_bps": report.secure_rate.per_second,
    }))
}

fn report(run: &mut Run) -> CliResult<serde_json::Value> {
    run.reject_slots(Command::Report)?;
    if run.common.preset.is_some() {
        return Err(CliError::Usage("--preset does not apply to `report`".into()));
    }
    let job = run.section(&run.config.report, "report")?;
    let table = ComparisonTable::new(&job.rows).map_err(Error::from)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    run.write("comparison.csv", csv)?;
    let notes = table.footnote_lines();
    run.write("comparison_notes.txt", notes.join("\n") + "\n")?;
    for e in &table.entries {
        println!(
            "{:<45} {:>9.2}e-6{}",
            e.row.name,
            e.index_e6,
            e.footnote.map_or(String::new(), |n| format!(" [{n}]"))
        );
    }
    for n in &notes {
        println!("{n}");
    }
    Ok(json!({ "rows": table.entries.len(), "footnotes": table.footnotes }))
}

fn execute(cli: &Cli) -> CliResult<()> {
    let common = &cli.common;
    let text = match &common.config {
        Some(path) => fs::read_to_string(path).map_err(|source| CliError::Io {
            action: "read",
            path: path.clone(),
            source,
        })?,
        None => default_config_source().to_string(),
    };
    let config = parse_config(&text)?;
    let mut overrides = Vec::new();
    let seed = match common.seed {
        Some(s) => {
            overrides.push(format!("seed = {s}"));
            s
        }
        None => config.seed,
    };
    fs::create_dir_all(&common.out).map_err(|source| CliError::Io {
        action: "create",
        path: common.out.clone(),
        source,
    })?;
    let mut run = Run {
        common,
        config,
        seed,
        overrides,
        outputs: Vec::new(),
    };
    let summary = match cli.command {
        Command::Characterize => characterize(&mut run)?,
        Command::Jitter => jitter(&mut run)?,
        Command::Bb84 => bb84(&mut run)?,
        Command::Bbm92 => bbm92(&mut run)?,
        Command::Report => report(&mut run)?,
    };
    let mut outputs = run.outputs.clone();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        subcommand: cli.command.name(),
        config_path: common.config.as_deref(),
        config_text: &text,
        seed,
        output_directory: &common.out,
        overrides: run.overrides.clone(),
        defaults_applied: &run.config.defaults_applied,
        outputs,
        summary,
    };
    let manifest = json_text(&manifest)?;
    run.write("manifest.json", manifest)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(if matches!(e, CliError::Usage(_)) { 2 } else { 1 })
        }
    }
}
