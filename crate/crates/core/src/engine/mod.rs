//! Seeded event timeline.
//!
//! A session walks its emission slots in order, pushes every pulse through
//! source, channel and receiver, and collects the detector clicks into an
//! [`EventLog`]. Given the same configuration and seed the log is identical
//! bit for bit.

mod bb84;
mod bbm92;
mod coincidence;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use bb84::run_bb84;
pub use bbm92::{run_bbm92, BBM92_CHANNELS};
pub(crate) use bbm92::zero_truncated_poisson;
pub use coincidence::{coincidences, coincidences_brute_force, CoincidencePair};

use crate::detector::{ClickCause, DetectionEvent};
use crate::error::{ModelError, Result};
use crate::optical::{Basis, IntensityLabel};
use crate::session::SessionConfig;

/// Slot assignment of a click time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBin {
    pub slot_index: i64,
    pub within_gate: bool,
}

/// Nearest slot center and whether the click falls inside its gate.
///
/// The gate is centered on the slot and `gate_fraction` of a period wide.
pub fn assign_time_bin(
    time_ns: f64,
    clock_rate_hz: f64,
    gate_fraction: f64,
) -> Result<TimeBin, ModelError> {
    if !(gate_fraction > 0.0 && gate_fraction <= 1.0) {
        return Err(ModelError::Domain {
            name: "gate_fraction",
            value: gate_fraction,
            domain: "(0, 1]",
        });
    }
    if !(clock_rate_hz > 0.0 && clock_rate_hz.is_finite()) {
        return Err(ModelError::Domain {
            name: "clock_rate_hz",
            value: clock_rate_hz,
            domain: "(0, inf)",
        });
    }
    Ok(time_bin(time_ns, 1e9 / clock_rate_hz, gate_fraction))
}

pub(crate) fn time_bin(time_ns: f64, period_ns: f64, gate_fraction: f64) -> TimeBin {
    let slot_index = (time_ns / period_ns).round();
    let offset = time_ns - slot_index * period_ns;
    TimeBin {
        slot_index: slot_index as i64,
        within_gate: offset.abs() <= gate_fraction * period_ns / 2.0,
    }
}

/// What went into the channel in one slot, kept for slots whose light
/// reached a receiver.
///
/// BB84 logs every slot with at least one photon at the receiver. BBM92 logs
/// only the pump windows in which both arms registered a photon click; every
/// other transmitter choice can be regenerated from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionRecord {
    pub slot: u64,
    /// Photons (BB84) or pairs (BBM92) emitted.
    pub n_emitted: u32,
    /// Photons reaching each receiver arm; BB84 uses only the first entry.
    pub n_arrived: [u32; 2],
    pub intensity: Option<IntensityLabel>,
    pub basis: Option<Basis>,
    pub bit: Option<u8>,
    pub multi_pair: bool,
}

/// Time-ordered detector clicks of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub seed: u64,
    pub clock_rate_hz: f64,
    pub slots: u64,
    /// Gate used to label clicks with a slot in exports.
    pub gate_fraction: f64,
    pub events: Vec<DetectionEvent>,
    pub emissions: Vec<EmissionRecord>,
}

/// Counts that summarize an [`EventLog`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub seed: u64,
    pub clock_rate_hz: f64,
    pub slots: u64,
    pub gate_fraction: f64,
    pub events: usize,
    pub photon_clicks: usize,
    pub dark_clicks: usize,
    pub within_gate: usize,
    pub clicks_per_channel: Vec<(u16, usize)>,
    pub emission_records: usize,
    pub first_time_ns: Option<f64>,
    pub last_time_ns: Option<f64>,
}

impl EventLog {
    pub fn empty(seed: u64, clock_rate_hz: f64, gate_fraction: f64) -> Self {
        Self {
            seed,
            clock_rate_hz,
            slots: 0,
            gate_fraction,
            events: Vec::new(),
            emissions: Vec::new(),
        }
    }

    pub fn period_ns(&self) -> f64 {
        1e9 / self.clock_rate_hz
    }

    /// Sort clicks by time, then channel.
    pub(crate) fn sort(&mut self) {
        self.events.sort_by(|a, b| {
            a.time_ns
                .total_cmp(&b.time_ns)
                .then(a.channel.cmp(&b.channel))
        });
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time_ns <= w[1].time_ns)
    }

    /// Slot label of a click under this log's gate.
    pub fn time_bin(&self, time_ns: f64) -> TimeBin {
        time_bin(time_ns, self.period_ns(), self.gate_fraction)
    }

    /// Sub-log holding only the clicks of the given channels.
    pub fn select_channels(&self, channels: &[u16]) -> EventLog {
        EventLog {
            events: self
                .events
                .iter()
                .filter(|e| channels.contains(&e.channel))
                .copied()
                .collect(),
            emissions: self.emissions.clone(),
            ..*self
        }
    }

    /// Emission record of a slot, if one was kept.
    pub fn emission(&self, slot: u64) -> Option<&EmissionRecord> {
        self.emissions
            .binary_search_by_key(&slot, |r| r.slot)
            .ok()
            .map(|i| &self.emissions[i])
    }

    pub fn summary(&self) -> LogSummary {
        let mut per_channel: Vec<(u16, usize)> = Vec::new();
        let mut photon = 0;
        let mut within = 0;
        for e in &self.events {
            if e.cause == ClickCause::Photon {
                photon += 1;
            }
            if self.time_bin(e.time_ns).within_gate {
                within += 1;
            }
            match per_channel.iter_mut().find(|(c, _)| *c == e.channel) {
                Some((_, n)) => *n += 1,
                None => per_channel.push((e.channel, 1)),
            }
        }
        per_channel.sort_unstable();
        LogSummary {
            seed: self.seed,
            clock_rate_hz: self.clock_rate_hz,
            slots: self.slots,
            gate_fraction: self.gate_fraction,
            events: self.events.len(),
            photon_clicks: photon,
            dark_clicks: self.events.len() - photon,
            within_gate: within,
            clicks_per_channel: per_channel,
            emission_records: self.emissions.len(),
            first_time_ns: self.events.first().map(|e| e.time_ns),
            last_time_ns: self.events.last().map(|e| e.time_ns),
        }
    }

    /// Columnar CSV: `time_ns,channel,cause,slot`. `slot` is empty for clicks
    /// outside every gate.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_ns", "channel", "cause", "slot"])?;
        for e in &self.events {
            let bin = self.time_bin(e.time_ns);
            let slot = if bin.within_gate {
                bin.slot_index.to_string()
            } else {
                String::new()
            };
            w.write_record([
                format!("{:.6}", e.time_ns),
                e.channel.to_string(),
                e.cause.as_str().to_string(),
                slot,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }
}

/// Run a validated session and return its click log.
pub fn run_session(config: &SessionConfig, seed: u64) -> Result<EventLog> {
    config.validate()?;
    match config {
        SessionConfig::Bb84(c) => run_bb84(c, seed),
        SessionConfig::Bbm92(c) => run_bbm92(c, seed),
    }
}
