use rand::Rng;

use super::{EmissionRecord, EventLog};
use crate::detector::DetectorChannel;
use crate::error::Result;
use crate::optical::{attenuate, fiber_transmittance, DecoySource};
use crate::qkd::{BasisChooser, Transmitter};
use crate::rng::{Role, SessionStreams};
use crate::session::Bb84Config;

/// Prepare-and-measure session: one sender, one receiver with two detectors.
///
/// Channel 0 registers bit 0 and channel 1 bit 1 in whichever basis the
/// receiver chose for the slot. A basis-matched photon reaches the wrong
/// detector with probability `misalignment_error`; a mismatched one picks a
/// detector at random.
pub fn run_bb84(cfg: &Bb84Config, seed: u64) -> Result<EventLog> {
    cfg.validate()?;
    let streams = SessionStreams::new(seed);
    let period = cfg.period_ns();
    let mut log = EventLog::empty(seed, cfg.clock_rate_hz, cfg.gate_fraction);
    log.slots = cfg.slots;
    if cfg.slots == 0 {
        return Ok(log);
    }

    let window = (-period / 2.0, (cfg.slots as f64 - 0.5) * period);
    let mut detectors = Vec::with_capacity(2);
    for ch in 0..2u16 {
        detectors.push(DetectorChannel::new(
            cfg.device.clone(),
            cfg.bias_ratio,
            ch,
            cfg.recovery,
            window,
            &streams,
        )?);
    }

    let transmittance = fiber_transmittance(&cfg.channel);
    let source = DecoySource::new(cfg.intensities, cfg.wavelength_nm)?;
    let mut tx = Transmitter::new(&streams, cfg.intensities);
    let mut bob = BasisChooser::new(&streams, Role::ReceiverBasis);
    let mut source_rng = streams.stream(Role::Source);
    let mut channel_rng = streams.stream(Role::Channel(0));
    let mut routing_rng = streams.stream(Role::Routing(0));

    for slot in 0..cfg.slots {
        let choice = tx.next();
        let t = slot as f64 * period;
        let mut pulse = source.emit(choice.intensity, t, &mut source_rng);
        if pulse.n_photons == 0 {
            continue;
        }
        pulse.basis = Some(choice.basis);
        pulse.bit = Some(choice.bit);
        let arrived = attenuate(&pulse, transmittance, &mut channel_rng)?;
        if arrived.n_photons == 0 {
            continue;
        }
        let matched = bob.at(slot) == choice.basis;
        let mut split = [0u32; 2];
        for _ in 0..arrived.n_photons {
            let u: f64 = routing_rng.random();
            let target = if matched {
                if u < cfg.misalignment_error {
                    1 - choice.bit
                } else {
                    choice.bit
                }
            } else {
                u8::from(u < 0.5)
            };
            split[target as usize] += 1;
        }
        for (det, &n) in detectors.iter_mut().zip(&split) {
            if n > 0 {
                det.offer(&arrived.with_photons(n))?;
            }
        }
        log.emissions.push(EmissionRecord {
            slot,
            n_emitted: pulse.n_photons,
            n_arrived: [arrived.n_photons, 0],
            intensity: Some(choice.intensity),
            basis: Some(choice.basis),
            bit: Some(choice.bit),
            multi_pair: false,
        });
    }

    for det in detectors {
        log.events.extend(det.finish()?);
    }
    log.sort();
    Ok(log)
}
