//! Configuration documents.
//!
//! One TOML document may define detector devices (`[[device]]`), fiber
//! channels (`[[channel]]`), and any of the job sections `[bb84]`, `[bbm92]`,
//! `[jitter]`, `[characterize]`, `[report]` and `[device_set]`. Jobs refer to
//! devices and channels by id. The built-in presets are always available and
//! may be shadowed by a device of the same id in the document.
//!
//! Every default filled in during resolution is echoed in
//! [`Config::defaults_applied`], so a resolved configuration is
//! self-describing.

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::analysis::ComparisonRow;
use crate::detector::{DeviceProfile, RecoveryMode};
use crate::error::ConfigError;
use crate::optical::{ChannelSpec, IntensitySet, PairSource};
use crate::session::{Bb84Config, Bbm92Config, KeyRateParams, PairSampling};

const PRESET_A: &str = include_str!("../presets/A.toml");
const PRESET_B: &str = include_str!("../presets/B.toml");
const PRESET_REF25: &str = include_str!("../presets/ref25.toml");
const PRESET_FIELD: &str = include_str!("../presets/field.toml");
const DEVICE_SET_A: &str = include_str!("../presets/device_set_A.toml");
const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

/// Ids of the built-in device presets.
pub const BUILTIN_DEVICES: [&str; 4] = ["A", "B", "ref25", "field"];

/// Names of the sections a document may contain.
pub const SECTIONS: [&str; 8] = [
    "device",
    "channel",
    "bb84",
    "bbm92",
    "jitter",
    "characterize",
    "report",
    "device_set",
];

pub const DEFAULT_SEED: u64 = 1;

/// Text of a shipped preset document, by device id.
pub fn preset_source(id: &str) -> Option<&'static str> {
    match id {
        "A" => Some(PRESET_A),
        "B" => Some(PRESET_B),
        "ref25" => Some(PRESET_REF25),
        "field" => Some(PRESET_FIELD),
        _ => None,
    }
}

/// The shipped calibrated configuration.
pub fn default_config_source() -> &'static str {
    DEFAULT_CONFIG
}

/// The shipped twelve-device #A measurement set.
pub fn device_set_source() -> &'static str {
    DEVICE_SET_A
}

/// Resolve a built-in device preset by id.
pub fn builtin_device(id: &str) -> Result<DeviceProfile, ConfigError> {
    let src = preset_source(id).ok_or_else(|| ConfigError::UnresolvedReference {
        kind: "device",
        id: id.to_string(),
    })?;
    let doc: RawDocument = from_toml(src)?;
    doc.device
        .into_iter()
        .find(|d| d.id == id)
        .ok_or_else(|| ConfigError::UnresolvedReference {
            kind: "device",
            id: id.to_string(),
        })
}

/// Built-in fiber channels.
pub fn builtin_channel(id: &str) -> Option<ChannelSpec> {
    match id {
        "field-97km" => Some(ChannelSpec {
            excess_loss_db: 1.5,
            ..ChannelSpec::fiber(97.0, 0.25)
        }),
        "lab-50km" => Some(ChannelSpec::fiber(50.0, 0.2)),
        "back-to-back" => Some(ChannelSpec::lossless()),
        _ => None,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    id: String,
    length_km: f64,
    loss_db_per_km: f64,
    #[serde(default)]
    excess_loss_db: f64,
    #[serde(default)]
    receiver_loss_db: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBb84 {
    device: Option<String>,
    channel: Option<String>,
    clock_rate_hz: Option<f64>,
    slots: Option<u64>,
    intensities: Option<IntensitySet>,
    bias_ratio: Option<f64>,
    wavelength_nm: Option<f64>,
    misalignment_error: Option<f64>,
    gate_fraction: Option<f64>,
    recovery: Option<RecoveryMode>,
    real_duration_s: Option<f64>,
    f_ec: Option<f64>,
    basis_factor: Option<f64>,
    vacuum_error: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBbm92 {
    device: Option<String>,
    arm_a: Option<String>,
    arm_b: Option<String>,
    pump_rate_hz: Option<f64>,
    mean_pairs: Option<f64>,
    visibility: Option<f64>,
    wavelength_nm: Option<f64>,
    slots: Option<u64>,
    bias_ratio: Option<f64>,
    coincidence_window_ns: Option<f64>,
    recovery: Option<RecoveryMode>,
    sampling: Option<PairSampling>,
    real_duration_s: Option<f64>,
    f_ec: Option<f64>,
    basis_factor: Option<f64>,
    vacuum_error: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJitter {
    device: Option<String>,
    sync_rate_hz: Option<f64>,
    clicks: Option<u64>,
    bin_width_ps: Option<f64>,
    photon_flux_cps: Option<f64>,
    bias_ratio: Option<f64>,
    wavelength_nm: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCharacterize {
    device: Option<String>,
    wavelength_nm: Option<f64>,
    bias_grid: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReport {
    #[serde(default)]
    row: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSetMember {
    pub id: String,
    /// Measured system efficiency at the operating point.
    pub de: f64,
    pub i_c_ua: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeviceSet {
    id: Option<String>,
    base: Option<String>,
    wavelength_nm: Option<f64>,
    de_floor: Option<f64>,
    jc_tolerance: Option<f64>,
    #[serde(default)]
    member: Vec<DeviceSetMember>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    seed: Option<u64>,
    #[serde(default)]
    device: Vec<DeviceProfile>,
    #[serde(default)]
    channel: Vec<RawChannel>,
    bb84: Option<RawBb84>,
    bbm92: Option<RawBbm92>,
    jitter: Option<RawJitter>,
    characterize: Option<RawCharacterize>,
    report: Option<RawReport>,
    device_set: Option<RawDeviceSet>,
}

impl RawDocument {
    fn is_empty(&self) -> bool {
        self.device.is_empty()
            && self.channel.is_empty()
            && self.bb84.is_none()
            && self.bbm92.is_none()
            && self.jitter.is_none()
            && self.characterize.is_none()
            && self.report.is_none()
            && self.device_set.is_none()
    }
}

/// TCSPC jitter measurement job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterConfig {
    pub device: DeviceProfile,
    pub sync_rate_hz: f64,
    pub clicks: u64,
    pub bin_width_ps: f64,
    pub photon_flux_cps: f64,
    pub bias_ratio: f64,
    pub wavelength_nm: f64,
}

/// Bias sweep job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeConfig {
    pub device: DeviceProfile,
    pub wavelength_nm: f64,
    pub bias_grid: Vec<f64>,
}

/// Detector comparison table job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub rows: Vec<ComparisonRow>,
}

/// A batch of like devices with their measured efficiencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSetConfig {
    pub id: String,
    pub base: String,
    pub wavelength_nm: f64,
    pub de_floor: f64,
    /// Allowed relative spread of J_c around the batch mean.
    pub jc_tolerance: f64,
    pub members: Vec<DeviceSetMember>,
    /// One profile per member: the base design rescaled to the member's
    /// measured efficiency and critical current.
    pub profiles: Vec<DeviceProfile>,
}

/// A parsed, resolved and validated configuration document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub seed: u64,
    pub devices: BTreeMap<String, DeviceProfile>,
    pub channels: BTreeMap<String, ChannelSpec>,
    pub bb84: Option<Bb84Config>,
    pub bbm92: Option<Bbm92Config>,
    pub jitter: Option<JitterConfig>,
    pub characterize: Option<CharacterizeConfig>,
    pub report: Option<ReportConfig>,
    pub device_set: Option<DeviceSetConfig>,
    /// `key = value` for every default filled in during resolution.
    pub defaults_applied: Vec<String>,
}

impl Config {
    pub fn device(&self, id: &str) -> Result<&DeviceProfile, ConfigError> {
        self.devices
            .get(id)
            .ok_or_else(|| ConfigError::UnresolvedReference {
                kind: "device",
                id: id.to_string(),
            })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

/// Records defaults as they are filled in.
struct Defaults(Vec<String>);

impl Defaults {
    fn pick<T: Display>(&mut self, value: Option<T>, default: T, key: &str) -> T {
        match value {
            Some(v) => v,
            None => {
                self.0.push(format!("{key} = {default}"));
                default
            }
        }
    }

    fn pick_with<T, F: FnOnce() -> T>(&mut self, value: Option<T>, key: &str, shown: &str, f: F) -> T {
        match value {
            Some(v) => v,
            None => {
                self.0.push(format!("{key} = {shown}"));
                f()
            }
        }
    }
}

// Calibrated defaults of the two link jobs.
const BB84_DEVICE: &str = "field";
const BB84_CHANNEL: &str = "field-97km";
const BB84_CLOCK_HZ: f64 = 625e6;
const BB84_SLOTS: u64 = 100_000_000;
const BB84_MISALIGNMENT: f64 = 0.018352;
const BB84_GATE_FRACTION: f64 = 0.5;
const BB84_DURATION_S: f64 = 3600.0;
const BBM92_DEVICE: &str = "field";
const BBM92_ARM: &str = "lab-50km";
const BBM92_PUMP_HZ: f64 = 5.5e6;
const BBM92_MEAN_PAIRS: f64 = 0.1;
const BBM92_VISIBILITY: f64 = 0.9484;
const BBM92_SLOTS: u64 = 30_000_000_000;
const BBM92_DURATION_S: f64 = 28800.0;
const JITTER_DEVICE: &str = "B";
const JITTER_SYNC_HZ: f64 = 33e6;
const JITTER_CLICKS: u64 = 100_000;
const JITTER_BIN_PS: f64 = 4.0;
const JITTER_FLUX_CPS: f64 = 1e7;
const CHARACTERIZE_DEVICE: &str = "A";
const DEVICE_SET_FLOOR: f64 = 0.01;
const DEVICE_SET_JC_TOLERANCE: f64 = 0.05;

fn key_rate(
    raw: [Option<f64>; 3],
    section: &str,
    d: &mut Defaults,
) -> KeyRateParams {
    let base = KeyRateParams::default();
    let [f_ec, basis_factor, vacuum_error] = raw;
    KeyRateParams {
        f_ec: d.pick(f_ec, base.f_ec, &format!("{section}.f_ec")),
        basis_factor: d.pick(basis_factor, base.basis_factor, &format!("{section}.basis_factor")),
        vacuum_error: d.pick(vacuum_error, base.vacuum_error, &format!("{section}.vacuum_error")),
    }
}

fn recovery_name(r: RecoveryMode) -> &'static str {
    match r {
        RecoveryMode::Exponential => "exponential",
        RecoveryMode::HardDeadTime => "hard-dead-time",
    }
}

/// Parse, resolve and validate a configuration document.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let raw: RawDocument = from_toml(text)?;
    if raw.is_empty() {
        return Err(ConfigError::MissingSections {
            expected: SECTIONS.to_vec(),
        });
    }
    let mut d = Defaults(Vec::new());
    let seed = d.pick(raw.seed, DEFAULT_SEED, "seed");

    let mut devices = BTreeMap::new();
    for id in BUILTIN_DEVICES {
        devices.insert(id.to_string(), builtin_device(id)?);
    }
    let mut seen = Vec::new();
    for dev in raw.device {
        if seen.contains(&dev.id) {
            return Err(ConfigError::Duplicate {
                kind: "device",
                id: dev.id,
            });
        }
        seen.push(dev.id.clone());
        devices.insert(dev.id.clone(), dev);
    }

    let mut channels = BTreeMap::new();
    for id in ["field-97km", "lab-50km", "back-to-back"] {
        channels.insert(id.to_string(), builtin_channel(id).expect("built-in channel"));
    }
    let mut seen = Vec::new();
    for ch in raw.channel {
        if seen.contains(&ch.id) {
            return Err(ConfigError::Duplicate {
                kind: "channel",
                id: ch.id,
            });
        }
        seen.push(ch.id.clone());
        channels.insert(
            ch.id,
            ChannelSpec {
                length_km: ch.length_km,
                loss_db_per_km: ch.loss_db_per_km,
                excess_loss_db: ch.excess_loss_db,
                receiver_loss_db: ch.receiver_loss_db,
            },
        );
    }

    let device = |id: &str| -> Result<DeviceProfile, ConfigError> {
        devices
            .get(id)
            .cloned()
            .ok_or_else(|| ConfigError::UnresolvedReference {
                kind: "device",
                id: id.to_string(),
            })
    };
    let channel = |id: &str| -> Result<ChannelSpec, ConfigError> {
        channels
            .get(id)
            .copied()
            .ok_or_else(|| ConfigError::UnresolvedReference {
                kind: "channel",
                id: id.to_string(),
            })
    };

    let mut violations = Vec::new();
    for dev in devices.values() {
        if let Err(mut v) = dev.validate() {
            violations.append(&mut v);
        }
    }
    for (id, ch) in &channels {
        if let Err(mut v) = ch.validate(id) {
            violations.append(&mut v);
        }
    }
    if !violations.is_empty() {
        return Err(ConfigError::invalid(violations));
    }

    let bb84 = match raw.bb84 {
        None => None,
        Some(r) => {
            let dev = device(&d.pick(r.device, BB84_DEVICE.to_string(), "bb84.device"))?;
            let ch = channel(&d.pick(r.channel, BB84_CHANNEL.to_string(), "bb84.channel"))?;
            let bias = d.pick(r.bias_ratio, dev.operating_bias(), "bb84.bias_ratio");
            let intensities = d.pick_with(
                r.intensities,
                "bb84.intensities",
                "{ mean_photons = [0.4, 0.15, 0.0], probabilities = [0.5, 0.25, 0.25] }",
                IntensitySet::default,
            );
            let recovery = d.pick_with(r.recovery, "bb84.recovery", recovery_name(RecoveryMode::default()), RecoveryMode::default);
            let cfg = Bb84Config {
                channel: ch,
                clock_rate_hz: d.pick(r.clock_rate_hz, BB84_CLOCK_HZ, "bb84.clock_rate_hz"),
                slots: d.pick(r.slots, BB84_SLOTS, "bb84.slots"),
                intensities,
                bias_ratio: bias,
                wavelength_nm: d.pick(r.wavelength_nm, 1550.0, "bb84.wavelength_nm"),
                misalignment_error: d.pick(
                    r.misalignment_error,
                    BB84_MISALIGNMENT,
                    "bb84.misalignment_error",
                ),
                gate_fraction: d.pick(r.gate_fraction, BB84_GATE_FRACTION, "bb84.gate_fraction"),
                recovery,
                key_rate: key_rate([r.f_ec, r.basis_factor, r.vacuum_error], "bb84", &mut d),
                real_duration_s: d.pick(r.real_duration_s, BB84_DURATION_S, "bb84.real_duration_s"),
                device: dev,
            };
            cfg.validate()?;
            Some(cfg)
        }
    };

    let bbm92 = match raw.bbm92 {
        None => None,
        Some(r) => {
            let dev = device(&d.pick(r.device, BBM92_DEVICE.to_string(), "bbm92.device"))?;
            let arm_a = channel(&d.pick(r.arm_a, BBM92_ARM.to_string(), "bbm92.arm_a"))?;
            let arm_b = channel(&d.pick(r.arm_b, BBM92_ARM.to_string(), "bbm92.arm_b"))?;
            let bias = d.pick(r.bias_ratio, dev.operating_bias(), "bbm92.bias_ratio");
            let window = d.pick(
                r.coincidence_window_ns,
                2.0 * dev.jitter_fwhm_ps * 1e-3,
                "bbm92.coincidence_window_ns",
            );
            let source = PairSource {
                mean_pairs: d.pick(r.mean_pairs, BBM92_MEAN_PAIRS, "bbm92.mean_pairs"),
                visibility: d.pick(r.visibility, BBM92_VISIBILITY, "bbm92.visibility"),
                wavelength_nm: d.pick(r.wavelength_nm, 1550.0, "bbm92.wavelength_nm"),
            };
            let recovery = d.pick_with(r.recovery, "bbm92.recovery", recovery_name(RecoveryMode::default()), RecoveryMode::default);
            let sampling = d.pick_with(r.sampling, "bbm92.sampling", "event-driven", PairSampling::default);
            let cfg = Bbm92Config {
                arm_a,
                arm_b,
                source,
                pump_rate_hz: d.pick(r.pump_rate_hz, BBM92_PUMP_HZ, "bbm92.pump_rate_hz"),
                slots: d.pick(r.slots, BBM92_SLOTS, "bbm92.slots"),
                bias_ratio: bias,
                coincidence_window_ns: window,
                recovery,
                sampling,
                key_rate: key_rate([r.f_ec, r.basis_factor, r.vacuum_error], "bbm92", &mut d),
                real_duration_s: d.pick(r.real_duration_s, BBM92_DURATION_S, "bbm92.real_duration_s"),
                device: dev,
            };
            cfg.validate()?;
            Some(cfg)
        }
    };

    let jitter = match raw.jitter {
        None => None,
        Some(r) => {
            let dev = device(&d.pick(r.device, JITTER_DEVICE.to_string(), "jitter.device"))?;
            let cfg = JitterConfig {
                sync_rate_hz: d.pick(r.sync_rate_hz, JITTER_SYNC_HZ, "jitter.sync_rate_hz"),
                clicks: d.pick(r.clicks, JITTER_CLICKS, "jitter.clicks"),
                bin_width_ps: d.pick(r.bin_width_ps, JITTER_BIN_PS, "jitter.bin_width_ps"),
                photon_flux_cps: d.pick(r.photon_flux_cps, JITTER_FLUX_CPS, "jitter.photon_flux_cps"),
                bias_ratio: d.pick(r.bias_ratio, dev.operating_bias(), "jitter.bias_ratio"),
                wavelength_nm: d.pick(r.wavelength_nm, 1550.0, "jitter.wavelength_nm"),
                device: dev,
            };
            let mut v = Vec::new();
            if !(cfg.sync_rate_hz > 0.0) {
                v.push(format!("jitter.sync_rate_hz must be positive, got {}", cfg.sync_rate_hz));
            }
            if !(cfg.bin_width_ps > 0.0) {
                v.push(format!("jitter.bin_width_ps must be positive, got {}", cfg.bin_width_ps));
            }
            if !(cfg.photon_flux_cps > 0.0) {
                v.push(format!("jitter.photon_flux_cps must be positive, got {}", cfg.photon_flux_cps));
            }
            if cfg.clicks == 0 {
                v.push("jitter.clicks must be positive".to_string());
            }
            if !(cfg.bias_ratio > 0.0 && cfg.bias_ratio <= 1.0) {
                v.push(format!("jitter.bias_ratio must lie in (0, 1], got {}", cfg.bias_ratio));
            }
            if !v.is_empty() {
                return Err(ConfigError::invalid(v));
            }
            Some(cfg)
        }
    };

    let characterize = match raw.characterize {
        None => None,
        Some(r) => {
            let dev = device(&d.pick(
                r.device,
                CHARACTERIZE_DEVICE.to_string(),
                "characterize.device",
            ))?;
            let grid = d.pick_with(r.bias_grid, "characterize.bias_grid", "0.00, 0.02, ..., 1.00", || {
                (0..=50).map(|i| i as f64 * 0.02).collect()
            });
            let bad: Vec<String> = grid
                .iter()
                .filter(|b| !(0.0..=1.0).contains(*b))
                .map(|b| format!("characterize.bias_grid value {b} outside [0, 1]"))
                .collect();
            if !bad.is_empty() {
                return Err(ConfigError::invalid(bad));
            }
            Some(CharacterizeConfig {
                wavelength_nm: d.pick(r.wavelength_nm, 1550.0, "characterize.wavelength_nm"),
                bias_grid: grid,
                device: dev,
            })
        }
    };

    let report = match raw.report {
        None => None,
        Some(r) => {
            let rows = if r.row.is_empty() {
                d.0.push("report.row = built-in detector comparison table".to_string());
                crate::analysis::comparison_table()
            } else {
                r.row
            };
            Some(ReportConfig { rows })
        }
    };

    let device_set = match raw.device_set {
        None => None,
        Some(r) => {
            let base_id = d.pick(r.base, "A".to_string(), "device_set.base");
            let base = device(&base_id)?;
            let wavelength = d.pick(r.wavelength_nm, 1550.0, "device_set.wavelength_nm");
            if r.member.is_empty() {
                return Err(ConfigError::invalid(vec![
                    "device_set needs at least one member".to_string(),
                ]));
            }
            let mut seen: Vec<&str> = Vec::new();
            for m in &r.member {
                if seen.contains(&m.id.as_str()) {
                    return Err(ConfigError::Duplicate {
                        kind: "device_set member",
                        id: m.id.clone(),
                    });
                }
                seen.push(&m.id);
            }
            let profiles = r
                .member
                .iter()
                .map(|m| member_profile(&base, m, wavelength))
                .collect::<Result<Vec<_>, _>>()?;
            Some(DeviceSetConfig {
                id: d.pick(r.id, format!("{base_id}-set"), "device_set.id"),
                base: base_id,
                wavelength_nm: wavelength,
                de_floor: d.pick(r.de_floor, DEVICE_SET_FLOOR, "device_set.de_floor"),
                jc_tolerance: d.pick(r.jc_tolerance, DEVICE_SET_JC_TOLERANCE, "device_set.jc_tolerance"),
                members: r.member,
                profiles,
            })
        }
    };

    Ok(Config {
        seed,
        devices,
        channels,
        bb84,
        bbm92,
        jitter,
        characterize,
        report,
        device_set,
        defaults_applied: d.0,
    })
}

/// The base design rescaled so its efficiency at the operating point equals
/// the member's measurement.
fn member_profile(
    base: &DeviceProfile,
    member: &DeviceSetMember,
    wavelength_nm: f64,
) -> Result<DeviceProfile, ConfigError> {
    let reference = crate::detector::efficiency_at_bias(base, base.operating_bias(), wavelength_nm)
        .map_err(|e| ConfigError::invalid(vec![format!("device_set: {e}")]))?;
    let mut v = Vec::new();
    if !(0.0..=1.0).contains(&member.de) {
        v.push(format!("device_set member `{}`: de {} outside [0, 1]", member.id, member.de));
    }
    if !(member.i_c_ua > 0.0) {
        v.push(format!("device_set member `{}`: i_c_ua must be positive", member.id));
    }
    if reference <= 0.0 {
        v.push(format!("device_set base `{}` has zero efficiency at its operating point", base.id));
    }
    if !v.is_empty() {
        return Err(ConfigError::invalid(v));
    }
    let scale = member.de / reference;
    let mut p = base.clone();
    p.id = member.id.clone();
    p.i_c_ua = member.i_c_ua;
    for a in &mut p.de_anchors {
        if (a.wavelength_nm - wavelength_nm).abs() < 0.5 {
            a.de = (a.de * scale).min(1.0);
        }
    }
    p.de_anchors.retain(|a| (a.wavelength_nm - wavelength_nm).abs() < 0.5);
    p.system_de_range = None;
    p.notes = Some(format!("member of a `{}` batch", base.id));
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_presets_validate() {
        for id in BUILTIN_DEVICES {
            let d = builtin_device(id).unwrap();
            assert_eq!(d.id, id);
            d.validate().unwrap();
        }
        assert!(builtin_device("nope").is_err());
    }

    #[test]
    fn line_and_column_of_offset() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn defaults_are_echoed() {
        let c = parse_config("[bb84]\nslots = 1000\n").unwrap();
        assert!(c.defaults_applied.iter().any(|s| s.starts_with("bb84.clock_rate_hz")));
        assert!(!c.defaults_applied.iter().any(|s| s.starts_with("bb84.slots")));
        assert_eq!(c.bb84.unwrap().slots, 1000);
    }

    #[test]
    fn default_document_parses() {
        let c = parse_config(default_config_source()).unwrap();
        assert!(c.bb84.is_some() && c.bbm92.is_some() && c.report.is_some());
    }
}
