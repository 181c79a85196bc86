//! Fully resolved session parameterizations.
//!
//! These are what the engine runs. Configuration documents refer to devices
//! and channels by id; [`crate::config`] resolves those references and fills
//! in the calibrated defaults defined here.

use serde::{Deserialize, Serialize};

use crate::detector::{DeviceProfile, RecoveryMode};
use crate::error::ConfigError;
use crate::optical::{ChannelSpec, IntensitySet, PairSource};

pub const DEFAULT_F_EC: f64 = 1.1;
pub const DEFAULT_BASIS_FACTOR: f64 = 0.5;
pub const DEFAULT_VACUUM_ERROR: f64 = 0.5;

/// Post-processing parameters of the asymptotic key-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateParams {
    /// Error-correction inefficiency, `f >= 1`.
    pub f_ec: f64,
    /// Basis-reconciliation factor.
    pub basis_factor: f64,
    /// Error rate of pure background clicks.
    pub vacuum_error: f64,
}

impl Default for KeyRateParams {
    fn default() -> Self {
        Self {
            f_ec: DEFAULT_F_EC,
            basis_factor: DEFAULT_BASIS_FACTOR,
            vacuum_error: DEFAULT_VACUUM_ERROR,
        }
    }
}

impl KeyRateParams {
    fn validate(&self, v: &mut Vec<String>, section: &str) {
        if !(self.f_ec >= 1.0) {
            v.push(format!("{section}.f_ec must be >= 1, got {}", self.f_ec));
        }
        if !(self.basis_factor > 0.0 && self.basis_factor <= 1.0) {
            v.push(format!("{section}.basis_factor must lie in (0, 1], got {}", self.basis_factor));
        }
        if !(0.0..=0.5).contains(&self.vacuum_error) {
            v.push(format!("{section}.vacuum_error must lie in [0, 0.5], got {}", self.vacuum_error));
        }
    }
}

/// One-way decoy-state BB84 link with a two-detector active-basis receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bb84Config {
    pub device: DeviceProfile,
    pub channel: ChannelSpec,
    pub clock_rate_hz: f64,
    pub slots: u64,
    pub intensities: IntensitySet,
    pub bias_ratio: f64,
    pub wavelength_nm: f64,
    /// Probability that a basis-matched photon reaches the wrong detector.
    pub misalignment_error: f64,
    /// Fraction of the slot period accepted as the detection gate.
    pub gate_fraction: f64,
    pub recovery: RecoveryMode,
    pub key_rate: KeyRateParams,
    /// Wall-clock duration the session stands in for; used for bit totals.
    pub real_duration_s: f64,
}

/// How a BBM92 session visits pump windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSampling {
    /// Jump between windows that deliver at least one detectable photon.
    #[default]
    EventDriven,
    /// Emit, attenuate and detect every window literally.
    PerWindow,
}

/// Entanglement-based BBM92 link: mid-point source, two receivers with two
/// detectors each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bbm92Config {
    pub device: DeviceProfile,
    pub arm_a: ChannelSpec,
    pub arm_b: ChannelSpec,
    pub source: PairSource,
    pub pump_rate_hz: f64,
    pub slots: u64,
    pub bias_ratio: f64,
    pub coincidence_window_ns: f64,
    pub recovery: RecoveryMode,
    pub sampling: PairSampling,
    pub key_rate: KeyRateParams,
    pub real_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum SessionConfig {
    Bb84(Bb84Config),
    Bbm92(Bbm92Config),
}

fn check_device(device: &DeviceProfile, bias: f64, v: &mut Vec<String>, section: &str) {
    if let Err(mut e) = device.validate() {
        v.append(&mut e);
    }
    if !(bias > 0.0 && bias <= 1.0) {
        v.push(format!("{section}.bias_ratio must lie in (0, 1], got {bias}"));
    }
}

fn finish(v: Vec<String>) -> Result<(), ConfigError> {
    if v.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::invalid(v))
    }
}

impl Bb84Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        check_device(&self.device, self.bias_ratio, &mut v, "bb84");
        if let Err(mut e) = self.channel.validate("bb84.channel") {
            v.append(&mut e);
        }
        if let Err(e) = self.intensities.validate() {
            v.extend(e.into_iter().map(|s| format!("bb84.{s}")));
        }
        if !(self.clock_rate_hz > 0.0 && self.clock_rate_hz.is_finite()) {
            v.push(format!("bb84.clock_rate_hz must be positive, got {}", self.clock_rate_hz));
        }
        if !(self.gate_fraction > 0.0 && self.gate_fraction <= 1.0) {
            v.push(format!("bb84.gate_fraction must lie in (0, 1], got {}", self.gate_fraction));
        }
        if !(0.0..=0.5).contains(&self.misalignment_error) {
            v.push(format!(
                "bb84.misalignment_error must lie in [0, 0.5], got {}",
                self.misalignment_error
            ));
        }
        if !(self.real_duration_s > 0.0) {
            v.push("bb84.real_duration_s must be positive".to_string());
        }
        self.key_rate.validate(&mut v, "bb84");
        if !self
            .device
            .calibration_lines()
            .iter()
            .any(|l| (l - self.wavelength_nm).abs() < 0.5)
        {
            v.push(format!(
                "bb84.wavelength_nm {} has no efficiency calibration on device `{}`",
                self.wavelength_nm, self.device.id
            ));
        }
        finish(v)
    }

    pub fn period_ns(&self) -> f64 {
        1e9 / self.clock_rate_hz
    }
}

impl Bbm92Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        check_device(&self.device, self.bias_ratio, &mut v, "bbm92");
        if let Err(mut e) = self.arm_a.validate("bbm92.arm_a") {
            v.append(&mut e);
        }
        if let Err(mut e) = self.arm_b.validate("bbm92.arm_b") {
            v.append(&mut e);
        }
        if !(self.source.mean_pairs >= 0.0 && self.source.mean_pairs.is_finite()) {
            v.push(format!("bbm92.mean_pairs must be non-negative, got {}", self.source.mean_pairs));
        }
        if !(0.0..=1.0).contains(&self.source.visibility) {
            v.push(format!("bbm92.visibility must lie in [0, 1], got {}", self.source.visibility));
        }
        if !(self.pump_rate_hz > 0.0 && self.pump_rate_hz.is_finite()) {
            v.push(format!("bbm92.pump_rate_hz must be positive, got {}", self.pump_rate_hz));
        }
        if !(self.coincidence_window_ns > 0.0) {
            v.push(format!(
                "bbm92.coincidence_window_ns must be positive, got {}",
                self.coincidence_window_ns
            ));
        } else if 2.0 * self.coincidence_window_ns >= self.period_ns() {
            v.push(format!(
                "bbm92.coincidence_window_ns {} must be below half the pump period {} ns",
                self.coincidence_window_ns,
                self.period_ns()
            ));
        }
        if !(self.real_duration_s > 0.0) {
            v.push("bbm92.real_duration_s must be positive".to_string());
        }
        self.key_rate.validate(&mut v, "bbm92");
        if !self
            .device
            .calibration_lines()
            .iter()
            .any(|l| (l - self.source.wavelength_nm).abs() < 0.5)
        {
            v.push(format!(
                "bbm92.wavelength_nm {} has no efficiency calibration on device `{}`",
                self.source.wavelength_nm, self.device.id
            ));
        }
        finish(v)
    }

    pub fn period_ns(&self) -> f64 {
        1e9 / self.pump_rate_hz
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            SessionConfig::Bb84(c) => c.validate(),
            SessionConfig::Bbm92(c) => c.validate(),
        }
    }
}
