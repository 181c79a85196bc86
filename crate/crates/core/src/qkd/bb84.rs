use super::rates::{analytic_gain, decoy_bounds, secure_key_rate, DecoyBounds, DecoyInputs, KeyRate};
use super::report::{
    binomial_sigma, AnalyticPrediction, CalibrationKnob, DecoyAnalysis, IntensityTally, Rate,
    ScalingLedger, SessionReport,
};
use super::sifting::{estimate_qber, receiver_detections, sift};
use super::{BasisChooser, Transmitter};
use crate::detector::{dark_rate_at_bias, efficiency_at_bias};
use crate::engine::run_bb84;
use crate::error::{ModelError, Result};
use crate::optical::{fiber_transmittance, IntensityLabel};
use crate::rng::{Role, SessionStreams};
use crate::session::{Bb84Config, SessionConfig};

/// Receiver detectors in the prepare-and-measure link.
const DETECTORS: f64 = 2.0;

/// End-to-end single-photon detection probability and background yield of a
/// link: `eta = T * DE(bias) * coupling`, `Y0 = 1 - exp(-2 R_dark t_gate)`.
pub fn bb84_link_parameters(cfg: &Bb84Config) -> Result<(f64, f64), ModelError> {
    let de = efficiency_at_bias(&cfg.device, cfg.bias_ratio, cfg.wavelength_nm)?;
    let eta = fiber_transmittance(&cfg.channel) * de * cfg.device.polarization_coupling;
    let gate_s = cfg.gate_fraction / cfg.clock_rate_hz;
    let dark = dark_rate_at_bias(&cfg.device, cfg.bias_ratio)?;
    let y0 = -(-DETECTORS * dark * gate_s).exp_m1();
    Ok((eta, y0))
}

fn bounds_from(
    gains: &[(f64, f64); 3],
    cfg: &Bb84Config,
) -> Result<DecoyBounds, ModelError> {
    let s = IntensityLabel::Signal.index();
    let d = IntensityLabel::Decoy.index();
    let v = IntensityLabel::Vacuum.index();
    let inputs = DecoyInputs {
        q_signal: gains[s].0,
        e_signal: gains[s].1,
        q_decoy: gains[d].0,
        e_decoy: gains[d].1,
        q_vacuum: gains[v].0,
        e_vacuum: gains[v].1,
    };
    decoy_bounds(
        &inputs,
        cfg.intensities.mean(IntensityLabel::Signal),
        cfg.intensities.mean(IntensityLabel::Decoy),
        cfg.key_rate.vacuum_error,
    )
}

fn key_rate_from(
    gains: &[(f64, f64); 3],
    bounds: &DecoyBounds,
    cfg: &Bb84Config,
) -> Result<KeyRate, ModelError> {
    let (q_mu, e_mu) = gains[IntensityLabel::Signal.index()];
    let mut r = secure_key_rate(
        q_mu,
        e_mu,
        bounds.q1_lower,
        bounds.e1_upper,
        cfg.key_rate.f_ec,
        cfg.key_rate.basis_factor,
    )?;
    if bounds.insecure {
        r.insecure = true;
        r.rate = 0.0;
    }
    Ok(r)
}

/// Closed-form expectations of a BB84 configuration.
pub fn bb84_analytic(cfg: &Bb84Config) -> Result<AnalyticPrediction, ModelError> {
    let (eta, y0) = bb84_link_parameters(cfg)?;
    let mut gains = [(0.0, 0.0); 3];
    for label in IntensityLabel::ALL {
        gains[label.index()] = analytic_gain(
            cfg.intensities.mean(label),
            eta,
            y0,
            cfg.misalignment_error,
            cfg.key_rate.vacuum_error,
        )?;
    }
    let mut detected = 0.0;
    let mut wrong = 0.0;
    for label in IntensityLabel::ALL {
        let p = cfg.intensities.probability(label);
        let (q, e) = gains[label.index()];
        detected += p * q;
        wrong += p * q * e;
    }
    let qber = if detected > 0.0 { wrong / detected } else { 0.0 };
    let sifted_per_slot = 0.5 * detected;
    let (decoy, key_rate) = match bounds_from(&gains, cfg) {
        Ok(b) => {
            let r = key_rate_from(&gains, &b, cfg)?;
            (Some(b), r)
        }
        Err(_) => (
            None,
            KeyRate {
                rate: 0.0,
                unfloored: 0.0,
                insecure: true,
            },
        ),
    };
    let secure_per_slot =
        (key_rate.rate * cfg.intensities.probability(IntensityLabel::Signal)).min(sifted_per_slot);
    Ok(AnalyticPrediction {
        eta_total: eta,
        y0,
        sifted_rate: Rate::from_per_slot(sifted_per_slot, cfg.clock_rate_hz),
        qber,
        secure_rate: Rate::from_per_slot(secure_per_slot, cfg.clock_rate_hz),
        key_rate,
        decoy,
        error_budget: None,
    })
}

fn calibration(cfg: &Bb84Config, eta: f64, y0: f64) -> Result<Vec<CalibrationKnob>, ModelError> {
    let de = efficiency_at_bias(&cfg.device, cfg.bias_ratio, cfg.wavelength_nm)?;
    let dark = dark_rate_at_bias(&cfg.device, cfg.bias_ratio)?;
    let p = &cfg.intensities;
    Ok(vec![
        CalibrationKnob::new("fiber_length_km", cfg.channel.length_km, "link length"),
        CalibrationKnob::new("fiber_loss_db_per_km", cfg.channel.loss_db_per_km, "tuned: installed-fiber attenuation"),
        CalibrationKnob::new("excess_loss_db", cfg.channel.excess_loss_db, "tuned: splices and connectors"),
        CalibrationKnob::new("receiver_loss_db", cfg.channel.receiver_loss_db, "tuned: receiver insertion loss"),
        CalibrationKnob::new("detector_efficiency", de, "tuned: system DE of the installed detectors"),
        CalibrationKnob::new("dark_rate_cps", dark, "tuned: dark rate per detector"),
        CalibrationKnob::new("bias_ratio", cfg.bias_ratio, "operating bias"),
        CalibrationKnob::new("misalignment_error", cfg.misalignment_error, "tuned: optical error of basis-matched photons"),
        CalibrationKnob::new("gate_fraction", cfg.gate_fraction, "tuned: detection gate as a fraction of the slot"),
        CalibrationKnob::new("p_signal", p.probability(IntensityLabel::Signal), "assumed intensity probability"),
        CalibrationKnob::new("p_decoy", p.probability(IntensityLabel::Decoy), "assumed intensity probability"),
        CalibrationKnob::new("p_vacuum", p.probability(IntensityLabel::Vacuum), "assumed intensity probability"),
        CalibrationKnob::new("f_ec", cfg.key_rate.f_ec, "assumed error-correction inefficiency"),
        CalibrationKnob::new("basis_factor", cfg.key_rate.basis_factor, "assumed basis-reconciliation factor"),
        CalibrationKnob::new("vacuum_error", cfg.key_rate.vacuum_error, "error rate of background clicks"),
        CalibrationKnob::new("eta_total", eta, "derived: channel times detector"),
        CalibrationKnob::new("y0", y0, "derived: background yield per gate"),
    ])
}

/// Full prepare-and-measure pipeline: run the timeline, sift, estimate the
/// QBER, bound the single-photon contribution and compute the key rate.
pub fn bb84_session(cfg: &Bb84Config, seed: u64) -> Result<SessionReport> {
    let log = run_bb84(cfg, seed)?;
    let streams = SessionStreams::new(seed);
    let mut bob = BasisChooser::new(&streams, Role::ReceiverBasis);
    let mut sifting_rng = streams.stream(Role::Sifting);
    let detections = receiver_detections(&log, |slot| bob.at(slot), &mut sifting_rng);
    let mut tx = Transmitter::new(&streams, cfg.intensities);
    let key = sift(&mut tx, &detections);

    let mut sent = [0u64; 3];
    let mut tx_seq = Transmitter::new(&streams, cfg.intensities);
    for _ in 0..cfg.slots {
        sent[tx_seq.next().intensity.index()] += 1;
    }
    let mut detected = [0u64; 3];
    for d in &detections {
        detected[tx.at(d.slot).intensity.index()] += 1;
    }
    let mut sifted = [0u64; 3];
    let mut errors = [0u64; 3];
    for i in 0..key.len() {
        let l = key.intensities[i].index();
        sifted[l] += 1;
        if key.bits[i] != key.reference[i] {
            errors[l] += 1;
        }
    }

    let analytic = bb84_analytic(cfg)?;
    let (eta, y0) = (analytic.eta_total, analytic.y0);
    let mut tallies = Vec::new();
    let mut mc_gains = [(0.0, 0.0); 3];
    let mut have_errors = true;
    for label in IntensityLabel::ALL {
        let l = label.index();
        let mean = cfg.intensities.mean(label);
        let (aq, ae) = analytic_gain(mean, eta, y0, cfg.misalignment_error, cfg.key_rate.vacuum_error)?;
        let gain = if sent[l] > 0 { detected[l] as f64 / sent[l] as f64 } else { 0.0 };
        let error_rate = (sifted[l] > 0).then(|| errors[l] as f64 / sifted[l] as f64);
        if sent[l] > 0 && error_rate.is_none() {
            have_errors = false;
        }
        mc_gains[l] = (gain, error_rate.unwrap_or(cfg.key_rate.vacuum_error));
        tallies.push(IntensityTally {
            label,
            mean_photons: mean,
            sent: sent[l],
            detected: detected[l],
            sifted: sifted[l],
            errors: errors[l],
            gain,
            gain_sigma: binomial_sigma(detected[l], sent[l]),
            error_rate,
            error_rate_sigma: error_rate.map(|_| binomial_sigma(errors[l], sifted[l])),
            analytic_gain: aq,
            analytic_error_rate: ae,
        });
    }

    let all_classes_sent = sent.iter().all(|&n| n > 0);
    let (bounds, unavailable) = if !all_classes_sent {
        (None, Some("not every intensity class was sent".to_string()))
    } else if !have_errors {
        (None, Some("an intensity class has no sifted bits".to_string()))
    } else {
        match bounds_from(&mc_gains, cfg) {
            Ok(b) => (Some(b), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let key_rate = match &bounds {
        Some(b) => key_rate_from(&mc_gains, b, cfg)?,
        None => KeyRate {
            rate: 0.0,
            unfloored: 0.0,
            insecure: true,
        },
    };

    let slots = cfg.slots.max(1);
    let sifted_rate = Rate::counted(key.len() as u64, slots, cfg.clock_rate_hz);
    let secure_per_slot = (key_rate.rate * cfg.intensities.probability(IntensityLabel::Signal))
        .min(sifted_rate.per_slot);
    let summary = log.summary();
    let qber = estimate_qber(&key).ok();
    Ok(SessionReport {
        protocol: "bb84".to_string(),
        seed,
        slots: cfg.slots,
        clock_rate_hz: cfg.clock_rate_hz,
        clicks: summary.events as u64,
        photon_clicks: summary.photon_clicks as u64,
        dark_clicks: summary.dark_clicks as u64,
        detections: detections.len() as u64,
        double_clicks: detections.iter().filter(|d| d.double_click).count() as u64,
        sifted_bits: key.len() as u64,
        sifted_errors: key.errors() as u64,
        sifted_rate,
        qber,
        qber_sigma: qber.map(|_| binomial_sigma(key.errors() as u64, key.len() as u64)),
        secure_rate: Rate::from_per_slot(secure_per_slot, cfg.clock_rate_hz),
        key_rate,
        decoy: Some(DecoyAnalysis {
            tallies,
            bounds,
            bounds_unavailable: unavailable,
        }),
        coincidence: None,
        error_budget: None,
        scaling: ScalingLedger::new(
            cfg.slots,
            cfg.clock_rate_hz,
            cfg.real_duration_s,
            sifted_rate.per_slot,
            secure_per_slot,
        ),
        calibration: calibration(cfg, eta, y0)?,
        analytic,
        config: SessionConfig::Bb84(cfg.clone()),
    })
}
