use serde::{Deserialize, Serialize};

use super::rates::{DecoyBounds, ErrorBudget, KeyRate};
use crate::optical::IntensityLabel;
use crate::session::SessionConfig;

/// A rate per simulated slot and the same rate at the real clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub per_slot: f64,
    pub per_second: f64,
    /// One-sigma binomial error of `per_second`, when counted.
    pub sigma_per_second: Option<f64>,
}

impl Rate {
    pub fn from_per_slot(per_slot: f64, clock_rate_hz: f64) -> Self {
        Self {
            per_slot,
            per_second: per_slot * clock_rate_hz,
            sigma_per_second: None,
        }
    }

    /// Rate of `count` successes in `trials` slots with its binomial error.
    pub fn counted(count: u64, trials: u64, clock_rate_hz: f64) -> Self {
        if trials == 0 {
            return Self {
                per_slot: 0.0,
                per_second: 0.0,
                sigma_per_second: Some(0.0),
            };
        }
        let p = count as f64 / trials as f64;
        Self {
            per_slot: p,
            per_second: p * clock_rate_hz,
            sigma_per_second: Some((p * (1.0 - p) / trials as f64).sqrt() * clock_rate_hz),
        }
    }
}

/// How desk-scale counts map onto the real experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingLedger {
    pub simulated_slots: u64,
    pub simulated_seconds: f64,
    pub real_clock_hz: f64,
    pub real_duration_s: f64,
    /// `real_clock * real_duration / simulated_slots`.
    pub count_scale: f64,
    pub sifted_bits_real_duration: f64,
    pub secure_bits_real_duration: f64,
}

impl ScalingLedger {
    pub fn new(
        slots: u64,
        clock_rate_hz: f64,
        real_duration_s: f64,
        sifted_per_slot: f64,
        secure_per_slot: f64,
    ) -> Self {
        let real_slots = clock_rate_hz * real_duration_s;
        Self {
            simulated_slots: slots,
            simulated_seconds: slots as f64 / clock_rate_hz,
            real_clock_hz: clock_rate_hz,
            real_duration_s,
            count_scale: if slots > 0 { real_slots / slots as f64 } else { 0.0 },
            sifted_bits_real_duration: sifted_per_slot * real_slots,
            secure_bits_real_duration: secure_per_slot * real_slots,
        }
    }
}

/// A tuned or assumed parameter that shapes the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationKnob {
    pub name: String,
    pub value: f64,
    pub note: String,
}

impl CalibrationKnob {
    pub fn new(name: &str, value: f64, note: &str) -> Self {
        Self {
            name: name.to_string(),
            value,
            note: note.to_string(),
        }
    }
}

/// Raw counts and derived statistics of one intensity class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityTally {
    pub label: IntensityLabel,
    pub mean_photons: f64,
    pub sent: u64,
    pub detected: u64,
    pub sifted: u64,
    pub errors: u64,
    /// Detected slots per sent pulse.
    pub gain: f64,
    pub gain_sigma: f64,
    /// Error fraction of the sifted bits; `None` without sifted bits.
    pub error_rate: Option<f64>,
    pub error_rate_sigma: Option<f64>,
    pub analytic_gain: f64,
    pub analytic_error_rate: f64,
}

/// Per-intensity statistics and the single-photon bounds derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyAnalysis {
    pub tallies: Vec<IntensityTally>,
    pub bounds: Option<DecoyBounds>,
    /// Why no bounds could be derived, if so.
    pub bounds_unavailable: Option<String>,
}

/// Closed-form predictions reported next to the Monte Carlo values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPrediction {
    pub eta_total: f64,
    pub y0: f64,
    pub sifted_rate: Rate,
    pub qber: f64,
    pub secure_rate: Rate,
    pub key_rate: KeyRate,
    pub decoy: Option<DecoyBounds>,
    pub error_budget: Option<ErrorBudget>,
}

/// Coincidence-level detail of an entanglement-based run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceDetail {
    pub window_ns: f64,
    pub coincidences: u64,
    pub sifted: u64,
    /// Errors in the sifted key split by what produced the coincidence.
    /// Diagnostic only: derived from click provenance the protocol never sees.
    pub sifted_by_origin: OriginCounts,
    pub errors_by_origin: OriginCounts,
    /// Per-window coincidence probabilities of the analytic model.
    pub analytic_true: f64,
    pub analytic_multi_pair: f64,
    pub analytic_accidental: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginCounts {
    pub single_pair: u64,
    pub multi_pair: u64,
    pub accidental: u64,
}

/// Outcome statistics of one QKD session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub protocol: String,
    pub seed: u64,
    pub slots: u64,
    pub clock_rate_hz: f64,
    pub clicks: u64,
    pub photon_clicks: u64,
    pub dark_clicks: u64,
    /// Slots (BB84) or coincidences (BBM92) that entered sifting.
    pub detections: u64,
    pub double_clicks: u64,
    pub sifted_bits: u64,
    pub sifted_errors: u64,
    pub sifted_rate: Rate,
    pub qber: Option<f64>,
    pub qber_sigma: Option<f64>,
    pub secure_rate: Rate,
    pub key_rate: KeyRate,
    pub decoy: Option<DecoyAnalysis>,
    pub coincidence: Option<CoincidenceDetail>,
    pub error_budget: Option<ErrorBudget>,
    pub analytic: AnalyticPrediction,
    pub scaling: ScalingLedger,
    pub calibration: Vec<CalibrationKnob>,
    pub config: SessionConfig,
}

impl SessionReport {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }
}

pub(crate) fn binomial_sigma(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = k as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}
