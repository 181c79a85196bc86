//! Model outputs checked against independent closed forms and exhaustive
//! references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sspd_core::analysis::{device_set_stats, tcspc_histogram};
use sspd_core::config::{builtin_device, default_config_source, device_set_source, parse_config};
use sspd_core::detector::{
    critical_current_density, dark_events, detect, ClickCause, DetectionEvent, DetectorState,
};
use sspd_core::engine::{coincidences, coincidences_brute_force, run_bb84, EventLog};
use sspd_core::optical::{ChannelSpec, IntensityLabel, IntensitySet, PhotonArrival};
use sspd_core::qkd::{analytic_gain, bb84_session, bbm92_session, binary_entropy};
use sspd_core::session::PairSampling;

fn within_sigmas(observed: f64, expected: f64, sigma: f64, k: f64) -> bool {
    (observed - expected).abs() <= k * sigma
}

fn log_of(times: &[f64]) -> EventLog {
    let mut log = EventLog::empty(0, 1e9, 1.0);
    log.events = times
        .iter()
        .map(|&time_ns| DetectionEvent {
            time_ns,
            channel: 0,
            cause: ClickCause::Dark,
        })
        .collect();
    log
}

fn poisson_process(rate_cps: f64, duration_ns: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / rate_cps * 1e9;
        if t >= duration_ns {
            return out;
        }
        out.push(t);
    }
}

#[test]
fn preset_a_table_values() {
    let a = builtin_device("A").unwrap();
    assert_eq!(a.i_c_ua, 19.0);
    assert_eq!(a.l_k_uh, 1.3);
    let jc = critical_current_density(19.0, 100.0, 3.9).unwrap();
    assert!((jc / 4.87e10 - 1.0).abs() < 1e-3, "{jc}");
    let jc_b = critical_current_density(15.0, 100.0, 3.9).unwrap();
    assert!((jc_b / 3.85e10 - 1.0).abs() < 2e-3, "{jc_b}");
}

#[test]
fn single_photon_click_fraction() {
    let a = builtin_device("A").unwrap();
    let mut state = DetectorState::new(0.9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 1_000_000;
    let mut clicks = 0u32;
    for k in 0..n {
        let arrival = PhotonArrival::new(k as f64 * 1000.0, 1, 1550.0);
        if detect(&a, &mut state, &arrival, 0, &mut rng).unwrap().is_some() {
            clicks += 1;
        }
    }
    let p = 0.026 * a.polarization_coupling;
    let frac = f64::from(clicks) / n as f64;
    assert!(within_sigmas(frac, p, (p * (1.0 - p) / n as f64).sqrt(), 4.0), "{frac}");
}

#[test]
fn dark_count_moments() {
    let a = builtin_device("A").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let counts: Vec<f64> = (0..100)
        .map(|_| dark_events(&a, 0.9, (0.0, 10e9), 0, &mut rng).unwrap().len() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / 100.0;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 99.0;
    assert!(within_sigmas(mean, 1000.0, (1000.0f64 / 100.0).sqrt(), 4.0), "{mean}");
    // sample variance of 100 Poisson(1000) draws has relative spread ~ sqrt(2/99)
    assert!((var / 1000.0 - 1.0).abs() < 4.0 * (2.0f64 / 99.0).sqrt(), "{var}");
}

#[test]
fn gain_matches_photon_number_expansion() {
    for &(lambda, eta, y0, e_det) in &[
        (0.4, 3.7e-5, 2e-7, 0.018),
        (0.15, 1e-3, 1e-6, 0.03),
        (0.0, 0.01, 1e-5, 0.0),
        (0.8, 0.3, 0.0, 0.05),
        (2.0, 0.5, 1e-4, 0.01),
    ] {
        let (mut q, mut eq) = (0.0, 0.0);
        let mut p_n = (-lambda as f64).exp();
        for n in 0..=50 {
            if n > 0 {
                p_n *= lambda / f64::from(n);
            }
            let eta_n = 1.0 - (1.0 - eta as f64).powi(n);
            let y_n = y0 + eta_n;
            q += p_n * y_n;
            eq += p_n * (0.5 * y0 + e_det * eta_n);
        }
        let (aq, ae) = analytic_gain(lambda, eta, y0, e_det, 0.5).unwrap();
        assert!((aq - q).abs() <= 1e-10 * q.max(1e-300), "Q {aq} vs {q}");
        assert!((ae - eq / q).abs() < 1e-9, "E {ae} vs {}", eq / q);
    }
}

#[test]
fn entropy_at_field_qber() {
    let p: f64 = 0.029;
    let h = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
    assert!((binary_entropy(p).unwrap() - h).abs() < 1e-15);
    assert!((h - 0.1894).abs() < 5e-4);
}

#[test]
fn total_clicks_follow_analytic_gain() {
    let mut cfg = parse_config(default_config_source()).unwrap().bb84.unwrap();
    cfg.clock_rate_hz = 1e6;
    cfg.channel = ChannelSpec::fiber(10.0, 0.2);
    cfg.slots = 1_000_000;
    cfg.intensities = IntensitySet::only(IntensityLabel::Signal, cfg.intensities.mean_photons);
    let report = bb84_session(&cfg, 23).unwrap();
    let eta = 10f64.powf(-0.2) * 0.014 * cfg.device.polarization_coupling;
    let y0 = 1.0 - (-2.0 * 125.0 * 0.5e-6f64).exp();
    let q = y0 + 1.0 - (-0.4 * eta).exp();
    let n = cfg.slots as f64;
    let observed = report.detections as f64 / n;
    assert!(within_sigmas(observed, q, (q * (1.0 - q) / n).sqrt(), 4.0), "{observed} vs {q}");

    // sifting keeps each detection with probability 1/2
    let d = report.detections as f64;
    assert!(within_sigmas(report.sifted_bits as f64, d / 2.0, (d / 4.0).sqrt(), 4.0));
}

#[test]
fn jittered_clicks_stay_in_their_slot() {
    let mut cfg = parse_config(default_config_source()).unwrap().bb84.unwrap();
    cfg.gate_fraction = 1.0;
    cfg.channel = ChannelSpec::fiber(5.0, 0.2);
    cfg.slots = 5_000_000;
    let log = run_bb84(&cfg, 24).unwrap();
    // P(|jitter| > 0.8 ns) with sigma = 100 ps / 2.3548
    let sigma = 0.1 / 2.354_82;
    let tail = libm::erfc(0.8 / (sigma * std::f64::consts::SQRT_2));
    assert!(tail < 1e-6);
    let photon: Vec<_> = log.events.iter().filter(|e| e.cause == ClickCause::Photon).collect();
    assert!(photon.len() > 1000);
    let misplaced = photon
        .iter()
        .filter(|e| log.emission(log.time_bin(e.time_ns).slot_index as u64).is_none())
        .count();
    assert_eq!(misplaced, 0);
}

#[test]
fn hundred_event_logs_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..50 {
        let mut a: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 500.0).collect();
        let mut b: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 500.0).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let w = rng.random::<f64>() * 5.0;
        let (la, lb) = (log_of(&a), log_of(&b));
        assert_eq!(coincidences(&la, &lb, w).unwrap(), coincidences_brute_force(&la, &lb, w));
    }
}

#[test]
fn accidental_coincidences_of_independent_streams() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let (r1, r2, w, t) = (2e4, 3e4, 50.0, 10e9);
    let la = log_of(&poisson_process(r1, t, &mut rng));
    let lb = log_of(&poisson_process(r2, t, &mut rng));
    let n = coincidences(&la, &lb, w).unwrap().len() as f64;
    let expected = 2.0 * r1 * r2 * w * 1e-9 * t * 1e-9;
    assert!(within_sigmas(n, expected, expected.sqrt(), 4.0), "{n} vs {expected}");
}

#[test]
fn uncorrelated_clicks_give_half_error() {
    let mut cfg = parse_config(default_config_source()).unwrap().bbm92.unwrap();
    cfg.source.mean_pairs = 0.0;
    cfg.device.dark_anchor.rate_cps = 1e6;
    cfg.coincidence_window_ns = 1.0;
    cfg.slots = 5_500_000;
    cfg.sampling = PairSampling::PerWindow;
    let r = bbm92_session(&cfg, 27).unwrap();
    let n = r.sifted_bits as f64;
    assert!(n > 1000.0, "{n}");
    let q = r.qber.unwrap();
    assert!(within_sigmas(q, 0.5, (0.25 / n).sqrt(), 4.0), "{q} over {n}");
    assert_eq!(r.photon_clicks, 0);
}

#[test]
fn uniform_times_fold_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let events: Vec<_> = (0..100_000)
        .map(|_| DetectionEvent {
            time_ns: rng.random::<f64>() * 1e6,
            channel: 0,
            cause: ClickCause::Dark,
        })
        .collect();
    let h = tcspc_histogram(&events, 25e6, 400.0).unwrap();
    assert_eq!(h.counts.len(), 100);
    let expected = 1000.0;
    let chi2: f64 = h.counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99 degrees of freedom: mean 99, standard deviation 14
    assert!(chi2 < 99.0 + 4.0 * 14.07, "{chi2}");
}

#[test]
fn shipped_device_set_spread() {
    let set = parse_config(device_set_source()).unwrap().device_set.unwrap();
    assert_eq!(set.profiles.len(), 12);
    let stats = device_set_stats(&set.profiles, set.wavelength_nm, set.de_floor, set.jc_tolerance).unwrap();
    assert!((stats.de.min - 0.008).abs() < 1e-12);
    assert!((stats.de.max - 0.026).abs() < 1e-12);
    assert!(!stats.all_above_floor);
    assert!(stats.jc_within_tolerance);
}
