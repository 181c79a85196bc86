//! Physics of one superconducting nanowire single-photon detector.
//!
//! A device is described by an immutable [`DeviceProfile`]: geometry, dc
//! characteristics, and the calibration anchors of its bias-dependent
//! efficiency and dark-count curves. Per-session mutable state lives in
//! [`DetectorState`]. After a click the bias current recovers through the
//! kinetic inductance with time constant `tau = L_k / R_load`, and photons
//! that arrive during recovery see the efficiency of the partially restored
//! bias.

mod channel;

pub use channel::DetectorChannel;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, ModelError};
use crate::optical::PhotonArrival;

/// Ratio of a Gaussian's FWHM to its standard deviation, `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Number of recovery time constants that make up one count-rate period.
///
/// Chosen so that a 0.3 uH device on a 50 ohm line counts at 66.7 MHz.
pub const RECOVERY_CONSTANTS_PER_COUNT: f64 = 2.5;

/// Default dark-rate slope: one decade per 0.05 of normalized bias.
pub fn default_dark_slope() -> f64 {
    std::f64::consts::LN_10 / 0.05
}

fn default_load_ohm() -> f64 {
    50.0
}

fn default_polarization_coupling() -> f64 {
    1.0
}

/// Wavelengths closer than this are treated as the same calibration line.
const WAVELENGTH_MATCH_NM: f64 = 0.5;

/// One point of the efficiency-versus-bias calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeAnchor {
    pub bias_ratio: f64,
    pub wavelength_nm: f64,
    pub de: f64,
}

/// Operating point of the dark-count curve, `R(b) = rate * exp(slope * (b - b*))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkAnchor {
    pub bias_ratio_star: f64,
    pub rate_cps: f64,
    #[serde(default = "default_dark_slope")]
    pub slope: f64,
}

/// Immutable description of one detector device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub id: String,
    /// Active area, width x height in um.
    pub area_um: [f64; 2],
    pub wire_width_nm: f64,
    pub pitch_nm: f64,
    pub thickness_nm: f64,
    pub fill_factor: f64,
    pub t_c_k: f64,
    pub i_c_ua: f64,
    pub r_20k_ohm: f64,
    pub l_k_uh: f64,
    #[serde(default = "default_load_ohm")]
    pub load_ohm: f64,
    /// Parallel shunt that keeps a fired wire from latching; `None` means unshunted.
    #[serde(default)]
    pub shunt_ohm: Option<f64>,
    #[serde(rename = "de_anchor")]
    pub de_anchors: Vec<DeAnchor>,
    pub dark_anchor: DarkAnchor,
    pub jitter_fwhm_ps: f64,
    #[serde(default)]
    pub latching_enabled: bool,
    /// Static fiber-to-wire polarization coupling factor in `[0, 1]`.
    #[serde(default = "default_polarization_coupling")]
    pub polarization_coupling: f64,
    /// Measured system DE spread across devices of this design (fractions).
    #[serde(default)]
    pub system_de_range: Option<[f64; 2]>,
    #[serde(default)]
    pub operating_temperature_k: Option<f64>,
    #[serde(default)]
    pub notes: Option<String>,
}

impl DeviceProfile {
    /// Check every profile invariant, returning all violations at once.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut v = Vec::new();
        let id = &self.id;
        for (name, value) in [
            ("wire_width_nm", self.wire_width_nm),
            ("pitch_nm", self.pitch_nm),
            ("thickness_nm", self.thickness_nm),
            ("i_c_ua", self.i_c_ua),
            ("l_k_uh", self.l_k_uh),
            ("load_ohm", self.load_ohm),
            ("jitter_fwhm_ps", self.jitter_fwhm_ps),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                v.push(format!("device `{id}`: {name} must be positive, got {value}"));
            }
        }
        if self.pitch_nm > 0.0 {
            let ratio = self.wire_width_nm / self.pitch_nm;
            if (self.fill_factor - ratio).abs() > 1e-9 {
                v.push(format!(
                    "device `{id}`: fill_factor {} != wire_width_nm / pitch_nm = {ratio}",
                    self.fill_factor
                ));
            }
        }
        if let Some(r) = self.shunt_ohm {
            if !(r > 0.0) {
                v.push(format!("device `{id}`: shunt_ohm must be positive, got {r}"));
            }
        }
        if !(0.0..=1.0).contains(&self.polarization_coupling) {
            v.push(format!(
                "device `{id}`: polarization_coupling {} outside [0, 1]",
                self.polarization_coupling
            ));
        }
        let dark = &self.dark_anchor;
        if !(dark.bias_ratio_star > 0.0 && dark.bias_ratio_star <= 1.0) {
            v.push(format!(
                "device `{id}`: dark_anchor.bias_ratio_star {} outside (0, 1]",
                dark.bias_ratio_star
            ));
        }
        if !(dark.rate_cps >= 0.0 && dark.rate_cps.is_finite()) {
            v.push(format!("device `{id}`: dark_anchor.rate_cps must be non-negative"));
        }
        if !(dark.slope > 0.0) {
            v.push(format!("device `{id}`: dark_anchor.slope must be positive"));
        }
        if self.de_anchors.is_empty() {
            v.push(format!("device `{id}`: at least one de_anchor is required"));
        }
        for a in &self.de_anchors {
            if !(0.0..=1.0).contains(&a.de) {
                v.push(format!("device `{id}`: de {} at bias {} outside [0, 1]", a.de, a.bias_ratio));
            }
            if !(a.bias_ratio > 0.0 && a.bias_ratio <= 1.0) {
                v.push(format!("device `{id}`: anchor bias_ratio {} outside (0, 1]", a.bias_ratio));
            }
        }
        for line in self.calibration_lines() {
            let pts = self.anchors_at(line);
            for w in pts.windows(2) {
                if w[1].0 <= w[0].0 {
                    v.push(format!(
                        "device `{id}`: de_anchors at {line} nm not strictly increasing in bias_ratio"
                    ));
                }
                if w[1].1 < w[0].1 {
                    v.push(format!(
                        "device `{id}`: de_anchors at {line} nm decrease with bias ({} -> {})",
                        w[0].1, w[1].1
                    ));
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Distinct calibrated wavelengths, in first-seen order.
    pub fn calibration_lines(&self) -> Vec<f64> {
        let mut lines: Vec<f64> = Vec::new();
        for a in &self.de_anchors {
            if !lines.iter().any(|l| (l - a.wavelength_nm).abs() < WAVELENGTH_MATCH_NM) {
                lines.push(a.wavelength_nm);
            }
        }
        lines
    }

    /// `(bias_ratio, de)` anchors of one wavelength in file order.
    fn anchors_at(&self, wavelength_nm: f64) -> Vec<(f64, f64)> {
        self.de_anchors
            .iter()
            .filter(|a| (a.wavelength_nm - wavelength_nm).abs() < WAVELENGTH_MATCH_NM)
            .map(|a| (a.bias_ratio, a.de))
            .collect()
    }

    /// Recovery time constant `L_k / R_load` in ns.
    pub fn reset_time_constant_ns(&self) -> f64 {
        // uH / ohm = us; x 1000 for ns
        self.l_k_uh * 1000.0 / self.load_ohm
    }

    pub fn jitter_sigma_ps(&self) -> f64 {
        self.jitter_fwhm_ps / FWHM_PER_SIGMA
    }

    /// Default operating bias: the dark-count anchor.
    pub fn operating_bias(&self) -> f64 {
        self.dark_anchor.bias_ratio_star
    }

    /// A fired wire latches only when latching is modeled and no shunt is fitted.
    pub fn latches(&self) -> bool {
        self.latching_enabled && self.shunt_ohm.is_none()
    }
}

fn check_bias(bias_ratio: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&bias_ratio) {
        Ok(())
    } else {
        Err(ModelError::Domain {
            name: "bias_ratio",
            value: bias_ratio,
            domain: "[0, 1]",
        })
    }
}

/// System detection efficiency at a normalized bias and wavelength.
///
/// Piecewise log-linear through the anchors of the wavelength; clamped to the
/// top anchor above it. Below the lowest anchor the first segment's
/// exponential trend is continued (a linear ramp from the origin when only
/// one anchor exists), and the efficiency is exactly zero at zero bias.
pub fn efficiency_at_bias(
    profile: &DeviceProfile,
    bias_ratio: f64,
    wavelength_nm: f64,
) -> Result<f64, ModelError> {
    check_bias(bias_ratio)?;
    let mut pts = profile.anchors_at(wavelength_nm);
    if pts.is_empty() {
        return Err(ModelError::CalibrationMissing {
            device: profile.id.clone(),
            wavelength_nm,
        });
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if bias_ratio == 0.0 {
        return Ok(0.0);
    }
    let last = pts[pts.len() - 1];
    if bias_ratio >= last.0 {
        return Ok(last.1);
    }
    if pts.len() == 1 {
        return Ok(last.1 * bias_ratio / last.0);
    }
    let seg = pts
        .windows(2)
        .position(|w| bias_ratio < w[1].0)
        .unwrap_or(pts.len() - 2);
    let (b0, d0) = pts[seg];
    let (b1, d1) = pts[seg + 1];
    let frac = (bias_ratio - b0) / (b1 - b0);
    let de = if d0 > 0.0 && d1 > 0.0 {
        d0 * (d1 / d0).powf(frac)
    } else {
        (d0 + (d1 - d0) * frac).max(0.0)
    };
    Ok(de.clamp(0.0, 1.0))
}

/// Dark-count rate in counts/s at a normalized bias.
pub fn dark_rate_at_bias(profile: &DeviceProfile, bias_ratio: f64) -> Result<f64, ModelError> {
    check_bias(bias_ratio)?;
    let a = &profile.dark_anchor;
    Ok(a.rate_cps * (a.slope * (bias_ratio - a.bias_ratio_star)).exp())
}

/// Bias (as a fraction of I_c) restored `dt_ns` after a click.
///
/// `None` means the detector has never fired and sits at the set bias.
pub fn recovered_bias(profile: &DeviceProfile, bias_ratio_set: f64, dt_ns: Option<f64>) -> f64 {
    match dt_ns {
        None => bias_ratio_set,
        Some(dt) => {
            let dt = dt.max(0.0);
            bias_ratio_set * (1.0 - (-dt / profile.reset_time_constant_ns()).exp())
        }
    }
}

/// Maximum sustained count rate in Hz, `1 / (c_rec * tau)`.
pub fn max_count_rate(profile: &DeviceProfile) -> f64 {
    1e9 / (RECOVERY_CONSTANTS_PER_COUNT * profile.reset_time_constant_ns())
}

/// Critical current density in A/m^2 from the design cross-section.
pub fn critical_current_density(
    i_c_ua: f64,
    wire_width_nm: f64,
    thickness_nm: f64,
) -> Result<f64, ModelError> {
    for (name, value) in [
        ("i_c_ua", i_c_ua),
        ("wire_width_nm", wire_width_nm),
        ("thickness_nm", thickness_nm),
    ] {
        if !(value > 0.0) {
            return Err(ModelError::Domain {
                name,
                value,
                domain: "(0, inf)",
            });
        }
    }
    Ok(i_c_ua * 1e-6 / (wire_width_nm * 1e-9 * thickness_nm * 1e-9))
}

/// How the bias returns after a click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryMode {
    /// Single-exponential recovery through the efficiency curve.
    #[default]
    Exponential,
    /// Fully blind for `1 / max_count_rate`, then fully recovered.
    HardDeadTime,
}

/// What produced a click. Diagnostic only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickCause {
    Photon,
    Dark,
}

impl ClickCause {
    pub fn as_str(self) -> &'static str {
        match self {
            ClickCause::Photon => "photon",
            ClickCause::Dark => "dark",
        }
    }
}

/// A registered click, jitter already applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub time_ns: f64,
    pub channel: u16,
    pub cause: ClickCause,
}

/// Mutable per-session state of one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    pub last_fire_time_ns: Option<f64>,
    pub latched: bool,
    pub bias_ratio_set: f64,
    pub recovery: RecoveryMode,
    last_input_ns: Option<f64>,
}

impl DetectorState {
    pub fn new(bias_ratio_set: f64) -> Result<Self, ModelError> {
        if !(bias_ratio_set > 0.0 && bias_ratio_set <= 1.0) {
            return Err(ModelError::Domain {
                name: "bias_ratio_set",
                value: bias_ratio_set,
                domain: "(0, 1]",
            });
        }
        Ok(Self {
            last_fire_time_ns: None,
            latched: false,
            bias_ratio_set,
            recovery: RecoveryMode::Exponential,
            last_input_ns: None,
        })
    }

    pub fn with_recovery(mut self, recovery: RecoveryMode) -> Self {
        self.recovery = recovery;
        self
    }

    /// Instantaneous bias ratio at `now_ns`.
    pub fn bias_at(&self, profile: &DeviceProfile, now_ns: f64) -> f64 {
        let dt = self.last_fire_time_ns.map(|t| now_ns - t);
        match self.recovery {
            RecoveryMode::Exponential => recovered_bias(profile, self.bias_ratio_set, dt),
            RecoveryMode::HardDeadTime => match dt {
                Some(dt) if dt < 1e9 / max_count_rate(profile) => 0.0,
                _ => self.bias_ratio_set,
            },
        }
    }

    /// Reject inputs that go back in time.
    pub(crate) fn advance_to(&mut self, time_ns: f64) -> Result<(), ModelError> {
        if !time_ns.is_finite() {
            return Err(ModelError::Domain {
                name: "time_ns",
                value: time_ns,
                domain: "finite",
            });
        }
        if let Some(prev) = self.last_input_ns {
            if time_ns < prev {
                return Err(ModelError::Sequencing {
                    time_ns,
                    previous_ns: prev,
                });
            }
        }
        self.last_input_ns = Some(time_ns);
        Ok(())
    }

    pub(crate) fn fire(&mut self, profile: &DeviceProfile, time_ns: f64) {
        self.last_fire_time_ns = Some(time_ns);
        if profile.latches() {
            self.latched = true;
        }
    }
}

/// Offer one optical pulse to the detector.
///
/// Clicks with probability `1 - (1 - eta)^n`, where `eta` is the efficiency at
/// the currently recovered bias times the polarization coupling. When the
/// arrival carries `prethinned_efficiency = Some(e)`, its photons already
/// survived a Bernoulli(e) thinning upstream and only the ratio `eta / e`
/// remains to be applied.
pub fn detect<R: Rng + ?Sized>(
    profile: &DeviceProfile,
    state: &mut DetectorState,
    arrival: &PhotonArrival,
    channel: u16,
    rng: &mut R,
) -> Result<Option<DetectionEvent>, ModelError> {
    state.advance_to(arrival.time_ns)?;
    if state.latched || arrival.n_photons == 0 {
        return Ok(None);
    }
    let bias = state.bias_at(profile, arrival.time_ns);
    let coupling = profile.polarization_coupling * (1.0 - arrival.polarization_mismatch);
    let mut eta = efficiency_at_bias(profile, bias, arrival.wavelength_nm)? * coupling;
    if let Some(pre) = arrival.prethinned_efficiency {
        if pre > 0.0 {
            eta = (eta / pre).min(1.0);
        }
    }
    let p_click = 1.0 - (1.0 - eta).powi(arrival.n_photons as i32);
    if !(rng.random::<f64>() < p_click) {
        return Ok(None);
    }
    state.fire(profile, arrival.time_ns);
    let sigma_ns = profile.jitter_sigma_ps() * 1e-3;
    let jitter = Normal::new(0.0, sigma_ns)
        .map_err(|e| ModelError::Parameter(e.to_string()))?
        .sample(rng);
    Ok(Some(DetectionEvent {
        time_ns: arrival.time_ns + jitter,
        channel,
        cause: ClickCause::Photon,
    }))
}

/// Homogeneous Poisson dark counts in `[t0, t1)` ns at a fixed bias, sorted by time.
pub fn dark_events<R: Rng + ?Sized>(
    profile: &DeviceProfile,
    bias_ratio: f64,
    window_ns: (f64, f64),
    channel: u16,
    rng: &mut R,
) -> Result<Vec<DetectionEvent>, ModelError> {
    let rate = dark_rate_at_bias(profile, bias_ratio)?;
    Ok(poisson_times(rate, window_ns, rng)?
        .into_iter()
        .map(|time_ns| DetectionEvent {
            time_ns,
            channel,
            cause: ClickCause::Dark,
        })
        .collect())
}

/// Sorted arrival times of a Poisson process of `rate_cps` over a window in ns.
pub(crate) fn poisson_times<R: Rng + ?Sized>(
    rate_cps: f64,
    (t0, t1): (f64, f64),
    rng: &mut R,
) -> Result<Vec<f64>, ModelError> {
    if !(t1 > t0) || rate_cps <= 0.0 {
        return Ok(Vec::new());
    }
    let mean = rate_cps * (t1 - t0) * 1e-9;
    let count = Poisson::new(mean)
        .map_err(|e| ModelError::Parameter(format!("dark count mean {mean}: {e}")))?
        .sample(rng) as usize;
    let mut times: Vec<f64> = (0..count)
        .map(|_| t0 + (t1 - t0) * rng.random::<f64>())
        .collect();
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// Click probability for `n` photons at efficiency `eta`.
pub fn click_probability(eta: f64, n: u32) -> Result<f64, ModelError> {
    check_fraction("eta", eta)?;
    Ok(1.0 - (1.0 - eta).powi(n as i32))
}
