//! QKD protocol layer.
//!
//! Sender and receiver choices, sifting, QBER estimation, decoy-state bounds
//! and secure-key rates for decoy BB84 and entanglement-based BBM92. Each
//! session report carries the Monte Carlo counts next to the closed-form
//! expectations for the same parameters, a ledger of tuned knobs, and the
//! scaling from the simulated slots to the real acquisition time.

mod bb84;
mod bbm92;
mod rates;
mod report;
mod sifting;
mod transmitter;

pub use bb84::{bb84_analytic, bb84_link_parameters, bb84_session};
pub use bbm92::{bbm92_analytic, bbm92_link_parameters, bbm92_session};
pub use rates::{
    analytic_gain, bbm92_key_rate, binary_entropy, decoy_bounds, pair_link_model,
    secure_key_rate, DecoyBounds, DecoyInputs, ErrorBudget, KeyRate, PairLinkModel,
    PairLinkParams,
};
pub use report::{
    AnalyticPrediction, CalibrationKnob, CoincidenceDetail, DecoyAnalysis, IntensityTally,
    OriginCounts, Rate, ScalingLedger, SessionReport,
};
pub use sifting::{
    estimate_qber, estimate_qber_sampled, qber, receiver_detections, sift, RxDetection,
    SiftedKey, SlotChoices,
};
pub use transmitter::{BasisChooser, Transmitter, TransmitterRecord, TxChoice};

use crate::error::Result;
use crate::session::SessionConfig;

/// Run either protocol end to end.
pub fn run_protocol(config: &SessionConfig, seed: u64) -> Result<SessionReport> {
    match config {
        SessionConfig::Bb84(c) => bb84_session(c, seed),
        SessionConfig::Bbm92(c) => bbm92_session(c, seed),
    }
}
