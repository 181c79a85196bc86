use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    dark_rate_at_bias, detect, poisson_times, ClickCause, DetectionEvent, DetectorState,
    DeviceProfile, RecoveryMode,
};
use crate::error::ModelError;
use crate::optical::PhotonArrival;
use crate::rng::{Role, SessionStreams};

/// A detector wired into a session timeline.
///
/// Owns the device state, its own random streams, and the candidate dark
/// counts for the whole session window. Candidate darks are drawn at the set
/// bias and thinned at replay time by `R(b_now) / R(b_set)`, so a detector
/// that is still recovering from a click is also less likely to dark-count.
/// Accepted darks reset the bias like any other click.
#[derive(Debug, Clone)]
pub struct DetectorChannel {
    profile: DeviceProfile,
    state: DetectorState,
    channel: u16,
    rng: ChaCha8Rng,
    dark_rng: ChaCha8Rng,
    dark_times: Vec<f64>,
    next_dark: usize,
    events: Vec<DetectionEvent>,
    photon_clicks: u64,
    dark_clicks: u64,
}

impl DetectorChannel {
    pub fn new(
        profile: DeviceProfile,
        bias_ratio: f64,
        channel: u16,
        recovery: RecoveryMode,
        window_ns: (f64, f64),
        streams: &SessionStreams,
    ) -> Result<Self, ModelError> {
        let state = DetectorState::new(bias_ratio)?.with_recovery(recovery);
        let mut dark_rng = streams.stream(Role::Dark(channel));
        let rate = dark_rate_at_bias(&profile, bias_ratio)?;
        let dark_times = poisson_times(rate, window_ns, &mut dark_rng)?;
        Ok(Self {
            profile,
            state,
            channel,
            rng: streams.stream(Role::Detector(channel)),
            dark_rng,
            dark_times,
            next_dark: 0,
            events: Vec::new(),
            photon_clicks: 0,
            dark_clicks: 0,
        })
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn channel(&self) -> u16 {
        self.channel
    }

    /// Replay dark candidates strictly before `time_ns`.
    fn replay_darks_before(&mut self, time_ns: f64) -> Result<(), ModelError> {
        while let Some(&t) = self.dark_times.get(self.next_dark) {
            if t >= time_ns {
                break;
            }
            self.next_dark += 1;
            self.state.advance_to(t)?;
            if self.state.latched {
                continue;
            }
            let set = self.state.bias_ratio_set;
            let now = self.state.bias_at(&self.profile, t);
            let accept = if now >= set {
                1.0
            } else {
                dark_rate_at_bias(&self.profile, now)? / dark_rate_at_bias(&self.profile, set)?
            };
            if self.dark_rng.random::<f64>() < accept {
                self.state.fire(&self.profile, t);
                self.dark_clicks += 1;
                self.events.push(DetectionEvent {
                    time_ns: t,
                    channel: self.channel,
                    cause: ClickCause::Dark,
                });
            }
        }
        Ok(())
    }

    /// Offer a pulse; any earlier dark candidates are replayed first.
    pub fn offer(&mut self, arrival: &PhotonArrival) -> Result<Option<DetectionEvent>, ModelError> {
        self.replay_darks_before(arrival.time_ns)?;
        let event = detect(
            &self.profile,
            &mut self.state,
            arrival,
            self.channel,
            &mut self.rng,
        )?;
        if let Some(e) = event {
            self.photon_clicks += 1;
            self.events.push(e);
        }
        Ok(event)
    }

    /// Replay the remaining darks and hand back every click, in emission order.
    pub fn finish(mut self) -> Result<Vec<DetectionEvent>, ModelError> {
        self.replay_darks_before(f64::INFINITY)?;
        Ok(self.events)
    }

    pub fn photon_clicks(&self) -> u64 {
        self.photon_clicks
    }

    pub fn dark_clicks(&self) -> u64 {
        self.dark_clicks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::tests::preset_a;

    #[test]
    fn darks_interleave_with_arrivals() {
        let mut a = preset_a();
        a.dark_anchor.rate_cps = 5e6;
        let streams = SessionStreams::new(9);
        let mut ch =
            DetectorChannel::new(a, 0.9, 0, RecoveryMode::Exponential, (0.0, 1e5), &streams)
                .unwrap();
        for i in 0..100 {
            ch.offer(&PhotonArrival::new(i as f64 * 1000.0, 0, 1550.0)).unwrap();
        }
        let events = ch.finish().unwrap();
        assert!(!events.is_empty());
        assert!(events.windows(2).all(|w| w[0].time_ns <= w[1].time_ns));
        assert!(events.iter().all(|e| e.cause == ClickCause::Dark));
    }

    #[test]
    fn recovering_detector_suppresses_darks() {
        let mut a = preset_a();
        // 1 dark per ~20 ns on average, tau = 26 ns: most candidates fall in recovery
        a.dark_anchor.rate_cps = 5e7;
        let streams = SessionStreams::new(4);
        let window = (0.0, 1e6);
        let candidates = {
            let mut rng = streams.stream(Role::Dark(0));
            poisson_times(5e7, window, &mut rng).unwrap().len()
        };
        let ch = DetectorChannel::new(a, 0.9, 0, RecoveryMode::Exponential, window, &streams)
            .unwrap();
        let accepted = ch.finish().unwrap().len();
        assert!(accepted < candidates / 2, "{accepted} of {candidates}");
    }
}
