use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};

use super::{EmissionRecord, EventLog};
use crate::detector::{efficiency_at_bias, DetectorChannel};
use crate::error::{ModelError, Result};
use crate::optical::{attenuate, fiber_transmittance, PhotonArrival};
use crate::qkd::BasisChooser;
use crate::rng::{Role, SessionStreams};
use crate::session::{Bbm92Config, PairSampling};

/// Detector channels of the two receivers: Alice owns 0 and 1, Bob 2 and 3.
/// Within a receiver the lower channel registers outcome 0.
pub const BBM92_CHANNELS: [[u16; 2]; 2] = [[0, 1], [2, 3]];

struct Receiver {
    detectors: Vec<DetectorChannel>,
    basis: BasisChooser,
}

impl Receiver {
    fn new(
        cfg: &Bbm92Config,
        arm: usize,
        window: (f64, f64),
        streams: &SessionStreams,
    ) -> Result<Self> {
        let mut detectors = Vec::with_capacity(2);
        for ch in BBM92_CHANNELS[arm] {
            detectors.push(DetectorChannel::new(
                cfg.device.clone(),
                cfg.bias_ratio,
                ch,
                cfg.recovery,
                window,
                streams,
            )?);
        }
        let role = if arm == 0 {
            Role::ReceiverBasis
        } else {
            Role::PartnerBasis
        };
        Ok(Self {
            detectors,
            basis: BasisChooser::new(streams, role),
        })
    }

    /// Route every photon by its outcome in this window's basis; true when a
    /// photon click was registered.
    fn deliver(&mut self, window: u64, arrival: &PhotonArrival) -> Result<bool> {
        let basis = self.basis.at(window);
        let mut split = [0u32; 2];
        for tag in &arrival.pairs {
            split[tag.outcome(basis) as usize] += 1;
        }
        let mut clicked = false;
        for (det, &n) in self.detectors.iter_mut().zip(&split) {
            if n > 0 && det.offer(&arrival.with_photons(n))?.is_some() {
                clicked = true;
            }
        }
        Ok(clicked)
    }

    fn finish(self, log: &mut EventLog) -> Result<()> {
        for det in self.detectors {
            log.events.extend(det.finish()?);
        }
        Ok(())
    }
}

fn record(window: u64, pairs: u32, a: &PhotonArrival, b: &PhotonArrival) -> EmissionRecord {
    EmissionRecord {
        slot: window,
        n_emitted: pairs,
        n_arrived: [a.n_photons, b.n_photons],
        intensity: None,
        basis: None,
        bit: None,
        multi_pair: pairs > 1,
    }
}

/// Entanglement-based session with a mid-point pair source.
///
/// With [`PairSampling::PerWindow`] every pump window is emitted, attenuated
/// and detected literally. [`PairSampling::EventDriven`] produces the same
/// click statistics while visiting only the windows that can produce a photon
/// click: each pair photon is kept with probability `T * eta_max`, where
/// `eta_max` is the steady-state detector efficiency, and the detector then
/// applies the remaining ratio `eta(bias now) / eta_max`. Windows with no kept
/// photon are skipped with a geometric jump.
pub fn run_bbm92(cfg: &Bbm92Config, seed: u64) -> Result<EventLog> {
    cfg.validate()?;
    let streams = SessionStreams::new(seed);
    let period = cfg.period_ns();
    let mut log = EventLog::empty(seed, cfg.pump_rate_hz, 1.0);
    log.slots = cfg.slots;
    if cfg.slots == 0 {
        return Ok(log);
    }
    let window = (-period / 2.0, (cfg.slots as f64 - 0.5) * period);
    let mut receivers = [
        Receiver::new(cfg, 0, window, &streams)?,
        Receiver::new(cfg, 1, window, &streams)?,
    ];
    match cfg.sampling {
        PairSampling::PerWindow => per_window(cfg, &streams, &mut receivers, &mut log)?,
        PairSampling::EventDriven => event_driven(cfg, &streams, &mut receivers, &mut log)?,
    }
    let [ra, rb] = receivers;
    ra.finish(&mut log)?;
    rb.finish(&mut log)?;
    log.sort();
    Ok(log)
}

fn per_window(
    cfg: &Bbm92Config,
    streams: &SessionStreams,
    receivers: &mut [Receiver; 2],
    log: &mut EventLog,
) -> Result<()> {
    let period = cfg.period_ns();
    let t_arm = [fiber_transmittance(&cfg.arm_a), fiber_transmittance(&cfg.arm_b)];
    let mut source_rng = streams.stream(Role::Source);
    let mut channel_rng = [streams.stream(Role::Channel(0)), streams.stream(Role::Channel(1))];
    for w in 0..cfg.slots {
        let Some((a, b)) = cfg.source.emit(w as f64 * period, &mut source_rng)? else {
            continue;
        };
        let pairs = a.n_photons;
        let a = attenuate(&a, t_arm[0], &mut channel_rng[0])?;
        let b = attenuate(&b, t_arm[1], &mut channel_rng[1])?;
        let ca = a.n_photons > 0 && receivers[0].deliver(w, &a)?;
        let cb = b.n_photons > 0 && receivers[1].deliver(w, &b)?;
        if ca && cb {
            log.emissions.push(record(w, pairs, &a, &b));
        }
    }
    Ok(())
}

/// Draw from a Poisson(`lambda`) conditioned on being at least one, by
/// inversion of the uniform `u`.
pub(crate) fn zero_truncated_poisson(lambda: f64, u: f64) -> u32 {
    let norm = -(-lambda).exp_m1();
    let mut p = lambda * (-lambda).exp() / norm;
    let mut cdf = p;
    let mut k = 1u32;
    while u >= cdf && p > 0.0 && k < 10_000 {
        k += 1;
        p *= lambda / f64::from(k);
        cdf += p;
    }
    k
}

fn event_driven(
    cfg: &Bbm92Config,
    streams: &SessionStreams,
    receivers: &mut [Receiver; 2],
    log: &mut EventLog,
) -> Result<()> {
    let period = cfg.period_ns();
    let mu = cfg.source.mean_pairs;
    let wavelength = cfg.source.wavelength_nm;
    let eta_max = efficiency_at_bias(&cfg.device, cfg.bias_ratio, wavelength)?
        * cfg.device.polarization_coupling;
    let a = fiber_transmittance(&cfg.arm_a) * eta_max;
    let b = fiber_transmittance(&cfg.arm_b) * eta_max;
    // kept-photon categories of one pair: both arms, arm A only, arm B only
    let rates = [mu * a * b, mu * a * (1.0 - b), mu * (1.0 - a) * b];
    let lambda: f64 = rates.iter().sum();
    let hidden = mu * (1.0 - a) * (1.0 - b);
    if !(lambda > 0.0) {
        return Ok(());
    }
    let gap = Geometric::new(-(-lambda).exp_m1())
        .map_err(|e| ModelError::Parameter(format!("window skip: {e}")))?;
    let hidden_pairs = if hidden > 0.0 {
        Some(Poisson::new(hidden).map_err(|e| ModelError::Parameter(e.to_string()))?)
    } else {
        None
    };
    let mut scheduler = streams.stream(Role::Scheduler);
    let mut source_rng = streams.stream(Role::Source);

    let mut w = gap.sample(&mut scheduler);
    while w < cfg.slots {
        let t = w as f64 * period;
        let k = zero_truncated_poisson(lambda, scheduler.random());
        let mut arm = [
            PhotonArrival::new(t, 0, wavelength),
            PhotonArrival::new(t, 0, wavelength),
        ];
        for _ in 0..k {
            let u = scheduler.random::<f64>() * lambda;
            let (ta, tb) = cfg.source.pair_tags(&mut source_rng);
            if u < rates[0] + rates[1] {
                arm[0].pairs.push(ta);
            }
            if u < rates[0] || u >= rates[0] + rates[1] {
                arm[1].pairs.push(tb);
            }
        }
        let unseen = hidden_pairs
            .as_ref()
            .map_or(0, |d| d.sample(&mut source_rng) as u32);
        let pairs = k + unseen;
        for a in &mut arm {
            a.n_photons = a.pairs.len() as u32;
            a.multi_pair = pairs > 1;
            a.prethinned_efficiency = Some(eta_max);
        }
        let ca = arm[0].n_photons > 0 && receivers[0].deliver(w, &arm[0])?;
        let cb = arm[1].n_photons > 0 && receivers[1].deliver(w, &arm[1])?;
        if ca && cb {
            log.emissions.push(record(w, pairs, &arm[0], &arm[1]));
        }
        w = w.saturating_add(1).saturating_add(gap.sample(&mut scheduler));
    }
    Ok(())
}
