use super::rates::{bbm92_key_rate, pair_link_model, PairLinkModel, PairLinkParams};
use super::report::{
    binomial_sigma, AnalyticPrediction, CalibrationKnob, CoincidenceDetail, OriginCounts, Rate,
    ScalingLedger, SessionReport,
};
use super::sifting::{estimate_qber, SiftedKey};
use super::BasisChooser;
use crate::detector::{dark_rate_at_bias, efficiency_at_bias, ClickCause};
use crate::engine::{coincidences, run_bbm92, EventLog, BBM92_CHANNELS};
use crate::error::{ModelError, Result};
use crate::optical::{fiber_transmittance, IntensityLabel};
use crate::rng::{Role, SessionStreams};
use crate::session::{Bbm92Config, SessionConfig};

/// Detectors per receiver.
const DETECTORS: f64 = 2.0;

/// Inputs of the closed-form coincidence model for a configuration.
pub fn bbm92_link_parameters(cfg: &Bbm92Config) -> Result<PairLinkParams, ModelError> {
    let de = efficiency_at_bias(&cfg.device, cfg.bias_ratio, cfg.source.wavelength_nm)?
        * cfg.device.polarization_coupling;
    let dark = dark_rate_at_bias(&cfg.device, cfg.bias_ratio)?;
    Ok(PairLinkParams {
        mean_pairs: cfg.source.mean_pairs,
        eta_a: fiber_transmittance(&cfg.arm_a) * de,
        eta_b: fiber_transmittance(&cfg.arm_b) * de,
        visibility: cfg.source.visibility,
        dark_a_cps: DETECTORS * dark,
        dark_b_cps: DETECTORS * dark,
        window_ns: cfg.coincidence_window_ns,
        pump_rate_hz: cfg.pump_rate_hz,
        jitter_sigma_ns: cfg.device.jitter_sigma_ps() * 1e-3,
    })
}

fn analytic(cfg: &Bbm92Config) -> Result<(AnalyticPrediction, PairLinkModel), ModelError> {
    let params = bbm92_link_parameters(cfg)?;
    let model = pair_link_model(&params)?;
    let key_rate = bbm92_key_rate(
        model.total.min(1.0),
        model.qber.min(0.5),
        cfg.key_rate.f_ec,
        cfg.key_rate.basis_factor,
    )?;
    let sifted = cfg.key_rate.basis_factor * model.total;
    Ok((
        AnalyticPrediction {
            eta_total: params.eta_a * params.eta_b,
            y0: model.accidental_coincidence,
            sifted_rate: Rate::from_per_slot(sifted, cfg.pump_rate_hz),
            qber: model.qber,
            secure_rate: Rate::from_per_slot(key_rate.rate.min(sifted), cfg.pump_rate_hz),
            key_rate,
            decoy: None,
            error_budget: Some(model.error_budget),
        },
        model,
    ))
}

/// Closed-form expectations of a BBM92 configuration.
pub fn bbm92_analytic(cfg: &Bbm92Config) -> Result<AnalyticPrediction, ModelError> {
    analytic(cfg).map(|(a, _)| a)
}

fn origin(log: &EventLog, window: u64, photon_a: bool, photon_b: bool) -> usize {
    match log.emission(window) {
        Some(rec) if photon_a && photon_b => usize::from(rec.multi_pair),
        _ => 2,
    }
}

fn bump(counts: &mut OriginCounts, origin: usize) {
    match origin {
        0 => counts.single_pair += 1,
        1 => counts.multi_pair += 1,
        _ => counts.accidental += 1,
    }
}

fn calibration(cfg: &Bbm92Config, params: &PairLinkParams) -> Vec<CalibrationKnob> {
    vec![
        CalibrationKnob::new("mean_pairs", cfg.source.mean_pairs, "assumed pairs per pump window"),
        CalibrationKnob::new("visibility", cfg.source.visibility, "tuned: two-photon visibility"),
        CalibrationKnob::new("pump_rate_hz", cfg.pump_rate_hz, "pump repetition rate"),
        CalibrationKnob::new("eta_a", params.eta_a, "derived: arm A channel times detector"),
        CalibrationKnob::new("eta_b", params.eta_b, "derived: arm B channel times detector"),
        CalibrationKnob::new("dark_rate_per_receiver_cps", params.dark_a_cps, "two detectors per receiver"),
        CalibrationKnob::new("coincidence_window_ns", cfg.coincidence_window_ns, "tuned: coincidence window"),
        CalibrationKnob::new("f_ec", cfg.key_rate.f_ec, "assumed error-correction inefficiency"),
        CalibrationKnob::new("basis_factor", cfg.key_rate.basis_factor, "assumed basis-reconciliation factor"),
    ]
}

/// Full entanglement-based pipeline: run the timeline, match coincidences,
/// sift by basis, estimate the QBER and compute the key rate.
pub fn bbm92_session(cfg: &Bbm92Config, seed: u64) -> Result<SessionReport> {
    let log = run_bbm92(cfg, seed)?;
    let log_a = log.select_channels(&BBM92_CHANNELS[0]);
    let log_b = log.select_channels(&BBM92_CHANNELS[1]);
    let pairs = coincidences(&log_a, &log_b, cfg.coincidence_window_ns)?;

    let streams = SessionStreams::new(seed);
    let mut basis_a = BasisChooser::new(&streams, Role::ReceiverBasis);
    let mut basis_b = BasisChooser::new(&streams, Role::PartnerBasis);
    let mut key = SiftedKey::default();
    let mut sifted_by_origin = OriginCounts::default();
    let mut errors_by_origin = OriginCounts::default();
    let mut in_range = 0u64;
    for p in &pairs {
        let ea = log_a.events[p.a];
        let eb = log_b.events[p.b];
        let bin = log.time_bin(ea.time_ns);
        if bin.slot_index < 0 || bin.slot_index as u64 >= cfg.slots {
            continue;
        }
        in_range += 1;
        let w = bin.slot_index as u64;
        if basis_a.at(w) != basis_b.at(w) {
            continue;
        }
        let bit_a = (ea.channel & 1) as u8;
        let bit_b = 1 - (eb.channel & 1) as u8;
        key.bits.push(bit_b);
        key.reference.push(bit_a);
        key.positions.push(w);
        key.intensities.push(IntensityLabel::Signal);
        let o = origin(
            &log,
            w,
            ea.cause == ClickCause::Photon,
            eb.cause == ClickCause::Photon,
        );
        bump(&mut sifted_by_origin, o);
        if bit_a != bit_b {
            bump(&mut errors_by_origin, o);
        }
    }

    let (analytic, model) = analytic(cfg)?;
    let params = bbm92_link_parameters(cfg)?;
    let slots = cfg.slots.max(1);
    let qber = estimate_qber(&key).ok();
    let q_c = in_range as f64 / slots as f64;
    let key_rate = match qber {
        Some(e) => bbm92_key_rate(q_c, e, cfg.key_rate.f_ec, cfg.key_rate.basis_factor)?,
        None => bbm92_key_rate(0.0, 0.0, cfg.key_rate.f_ec, cfg.key_rate.basis_factor)?,
    };
    let sifted_rate = Rate::counted(key.len() as u64, slots, cfg.pump_rate_hz);
    let secure_per_slot = key_rate.rate.min(sifted_rate.per_slot);
    let summary = log.summary();
    Ok(SessionReport {
        protocol: "bbm92".to_string(),
        seed,
        slots: cfg.slots,
        clock_rate_hz: cfg.pump_rate_hz,
        clicks: summary.events as u64,
        photon_clicks: summary.photon_clicks as u64,
        dark_clicks: summary.dark_clicks as u64,
        detections: in_range,
        double_clicks: 0,
        sifted_bits: key.len() as u64,
        sifted_errors: key.errors() as u64,
        sifted_rate,
        qber,
        qber_sigma: qber.map(|_| binomial_sigma(key.errors() as u64, key.len() as u64)),
        secure_rate: Rate::from_per_slot(secure_per_slot, cfg.pump_rate_hz),
        key_rate,
        decoy: None,
        coincidence: Some(CoincidenceDetail {
            window_ns: cfg.coincidence_window_ns,
            coincidences: in_range,
            sifted: key.len() as u64,
            sifted_by_origin,
            errors_by_origin,
            analytic_true: model.true_coincidence,
            analytic_multi_pair: model.multi_pair_coincidence,
            analytic_accidental: model.accidental_coincidence,
        }),
        error_budget: analytic.error_budget,
        scaling: ScalingLedger::new(
            cfg.slots,
            cfg.pump_rate_hz,
            cfg.real_duration_s,
            sifted_rate.per_slot,
            secure_per_slot,
        ),
        calibration: calibration(cfg, &params),
        analytic,
        config: SessionConfig::Bbm92(cfg.clone()),
    })
}
