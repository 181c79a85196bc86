//! Acceptance criteria of the simulator, one pass/fail line each.
//!
//! Runs as a plain binary so the lines appear in `cargo test` output. Exits
//! nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sspd_core::analysis::{fwhm, run_jitter, ComparisonTable, Histogram};
use sspd_core::config::{builtin_device, default_config_source, parse_config, Config};
use sspd_core::detector::{
    dark_rate_at_bias, efficiency_at_bias, max_count_rate, DetectionEvent, ClickCause,
};
use sspd_core::engine::{coincidences, coincidences_brute_force, run_bb84, EventLog};
use sspd_core::optical::{attenuate, wcp_emit, ChannelSpec, IntensityLabel, IntensitySet};
use sspd_core::qkd::{bb84_session, bbm92_session, binary_entropy, decoy_bounds, DecoyInputs};

type Outcome = Result<String, String>;

fn defaults() -> Config {
    parse_config(default_config_source()).expect("built-in configuration parses")
}

fn within(value: f64, lo: f64, hi: f64) -> bool {
    value >= lo && value <= hi
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn performance_index() -> Outcome {
    let cfg = defaults();
    let rows = cfg.report.expect("report section").rows;
    let table = ComparisonTable::new(&rows).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    let mut ok = true;
    for prefix in ["InGaAs/InP APD [1]", "SFG Si APD [3]", "SSPD"] {
        let e = table.entry(prefix).ok_or(format!("row {prefix} missing"))?;
        let dev = e.deviation.ok_or("no printed value")?;
        ok &= dev.abs() <= 0.02;
        detail.push(format!("{prefix} {:.2}e-6 ({:+.2}%)", e.index_e6, dev * 100.0));
    }
    let flagged = table.entry("InGaAs/InP APD [2]").ok_or("row [2] missing")?;
    let footnoted = flagged.footnote.is_some()
        && table
            .footnote_lines()
            .iter()
            .any(|l| l.contains("InGaAs/InP APD [2]") && l.contains("6.8"));
    ok &= footnoted;
    detail.push(format!("row [2] {:.1}e-6 footnoted: {footnoted}", flagged.index_e6));
    check(ok, detail.join(", "))
}

fn operating_point() -> Outcome {
    let a = builtin_device("A").map_err(|e| e.to_string())?;
    let b = a.operating_bias();
    let de1550 = efficiency_at_bias(&a, b, 1550.0).map_err(|e| e.to_string())?;
    let de1310 = efficiency_at_bias(&a, b, 1310.0).map_err(|e| e.to_string())?;
    let dark = dark_rate_at_bias(&a, b).map_err(|e| e.to_string())?;
    let ok = (de1550 - 0.026).abs() < 1e-12
        && (dark - 100.0).abs() < 1e-9
        && (de1310 - 0.045).abs() < 1e-12;
    check(
        ok,
        format!("b* = {b}: DE(1550) = {de1550}, dark = {dark} c/s, DE(1310) = {de1310}"),
    )
}

fn jitter_pipeline() -> Outcome {
    let job = defaults().jitter.expect("jitter section");
    let start = Instant::now();
    let run = run_jitter(&job, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let ok = run.clicks == 100_000 && within(run.fwhm_ps, 95.0, 105.0) && elapsed < 1.0;
    check(
        ok,
        format!(
            "{} clicks at {} MHz sync, {} ps bins: FWHM {:.1} ps in {:.2} s",
            run.clicks,
            job.sync_rate_hz / 1e6,
            job.bin_width_ps,
            run.fwhm_ps,
            elapsed
        ),
    )
}

fn count_rate_limit() -> Outcome {
    let b = builtin_device("B").map_err(|e| e.to_string())?;
    let rate = max_count_rate(&b) / 1e6;
    check(
        b.l_k_uh == 0.3 && within(rate, 60.0, 73.0),
        format!("L_k = {} uH: max count rate {rate:.1} MHz", b.l_k_uh),
    )
}

/// Closed-form gain and error rate, written out independently of the library.
fn expected_gain(lambda: f64, eta: f64, y0: f64, e_det: f64) -> (f64, f64) {
    let q = y0 + 1.0 - (-eta * lambda).exp();
    if q == 0.0 {
        return (0.0, 0.5);
    }
    let e = (0.5 * y0 + e_det * (1.0 - (-eta * lambda).exp())) / q;
    (q, e)
}

fn monte_carlo_equivalence() -> Outcome {
    let mut cfg = defaults().bb84.expect("bb84 section");
    cfg.clock_rate_hz = 1e6;
    cfg.channel = ChannelSpec::fiber(20.0, 0.2);
    cfg.slots = 1_000_000;
    let means = cfg.intensities.mean_photons;
    let t = 10f64.powf(-20.0 * 0.2 / 10.0);
    let de = efficiency_at_bias(&cfg.device, cfg.bias_ratio, 1550.0).map_err(|e| e.to_string())?;
    let eta = t * de * cfg.device.polarization_coupling;
    let dark = dark_rate_at_bias(&cfg.device, cfg.bias_ratio).map_err(|e| e.to_string())?;
    let gate_s = cfg.gate_fraction * 1e-6;
    let y0 = 1.0 - (-2.0 * dark * gate_s).exp();
    let mut ok = true;
    let mut detail = Vec::new();
    let start = Instant::now();
    for (seed, label) in (1..).zip(IntensityLabel::ALL) {
        cfg.intensities = IntensitySet::only(label, means);
        let report = bb84_session(&cfg, seed).map_err(|e| e.to_string())?;
        let tally = report
            .decoy
            .as_ref()
            .and_then(|d| d.tallies.iter().find(|t| t.label == label).cloned())
            .ok_or("missing tally")?;
        let (q, e) = expected_gain(means[label.index()], eta, y0, cfg.misalignment_error);
        let sq = (q * (1.0 - q) / tally.sent as f64).sqrt();
        let z_q = (tally.gain - q) / sq;
        let e_mc = tally.error_rate.ok_or("no sifted bits")?;
        let se = (e * (1.0 - e) / tally.sifted as f64).sqrt();
        let z_e = (e_mc - e) / se;
        ok &= z_q.abs() <= 4.0 && z_e.abs() <= 4.0;
        detail.push(format!(
            "mu={}: Q {:.4e} vs {:.4e} ({z_q:+.1} sigma), E {:.4} vs {:.4} ({z_e:+.1} sigma)",
            means[label.index()],
            tally.gain,
            q,
            e_mc,
            e
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 10.0;
    detail.push(format!("{elapsed:.1} s"));
    check(ok, detail.join("; "))
}

fn decoy_soundness() -> Outcome {
    let (mu, nu, e0) = (0.4, 0.15, 0.5);
    let mut points = 0;
    let mut failures = Vec::new();
    let mut tightness = f64::INFINITY;
    for &eta in &[1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3] {
        for &y0 in &[0.0, 1e-10, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4] {
            for &e_det in &[0.0, 0.01, 0.02, 0.033, 0.05] {
                points += 1;
                let g = |l: f64| expected_gain(l, eta, y0, e_det);
                let (qm, em) = g(mu);
                let (qn, en) = g(nu);
                let (qv, ev) = g(0.0);
                let inputs = DecoyInputs {
                    q_signal: qm,
                    e_signal: em,
                    q_decoy: qn,
                    e_decoy: en,
                    q_vacuum: qv,
                    e_vacuum: ev,
                };
                let b = match decoy_bounds(&inputs, mu, nu, e0) {
                    Ok(b) => b,
                    Err(e) => {
                        failures.push(format!("eta={eta} y0={y0} e={e_det}: {e}"));
                        continue;
                    }
                };
                let y1 = y0 + eta;
                let e1 = (e0 * y0 + e_det * eta) / y1;
                let slack = 1e-12 * y1;
                if b.y1_lower > y1 + slack || b.e1_upper < e1 - 1e-9 {
                    failures.push(format!(
                        "eta={eta} y0={y0} e={e_det}: Y1 {} > {y1} or e1 {} < {e1}",
                        b.y1_lower, b.e1_upper
                    ));
                }
                if y0 <= 1e-5 * eta {
                    tightness = tightness.min(b.y1_lower / y1);
                    if b.y1_lower < 0.9 * y1 {
                        failures.push(format!("eta={eta} y0={y0}: Y1 bound {:.3} of true", b.y1_lower / y1));
                    }
                }
            }
        }
    }
    check(
        failures.is_empty() && points >= 100,
        format!(
            "{points} grid points, {} violations, tightest low-background ratio {tightness:.4}{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(" (first: {f})"))
        ),
    )
}

fn bb84_field_test() -> Outcome {
    let cfg = defaults().bb84.expect("bb84 section");
    let start = Instant::now();
    let r = bb84_session(&cfg, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let sifted = r.sifted_rate.per_second / 1e3;
    let secure = r.secure_rate.per_second / 1e3;
    let qber = r.qber.ok_or("empty key")? * 100.0;
    let knobs: Vec<&str> = r.calibration.iter().map(|k| k.name.as_str()).collect();
    let named = [
        "fiber_loss_db_per_km",
        "excess_loss_db",
        "receiver_loss_db",
        "detector_efficiency",
        "dark_rate_cps",
        "misalignment_error",
        "gate_fraction",
        "p_signal",
        "p_decoy",
        "p_vacuum",
    ]
    .iter()
    .all(|n| knobs.contains(n));
    let ok = within(sifted, 2.4 * 0.7, 2.4 * 1.3)
        && within(qber, 2.4, 3.4)
        && within(secure, 0.4, 1.6)
        && named
        && elapsed < 60.0;
    check(
        ok,
        format!(
            "{} slots at {} MHz: sifted {sifted:.3} kbps, QBER {qber:.2}% (+/- {:.2}), secure {secure:.3} kbps, ledger complete: {named}, {elapsed:.1} s",
            r.slots,
            r.clock_rate_hz / 1e6,
            r.qber_sigma.unwrap_or(0.0) * 100.0
        ),
    )
}

fn bbm92_reproduction() -> Outcome {
    let cfg = defaults().bbm92.expect("bbm92 section");
    let arms_ok = [cfg.arm_a, cfg.arm_b]
        .iter()
        .all(|a| a.length_km == 50.0 && a.loss_db_per_km == 0.2);
    let start = Instant::now();
    let r = bbm92_session(&cfg, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let qber = r.qber.ok_or("empty key")? * 100.0;
    let sifted = r.sifted_rate.per_second;
    let yield_ = r.secure_rate.per_second / sifted;
    let ok = arms_ok
        && within(qber, 5.4, 8.4)
        && within(sifted, 0.59 / 3.0, 0.59 * 3.0)
        && within(yield_, 0.15, 0.35)
        && elapsed < 60.0;
    check(
        ok,
        format!(
            "{} sifted bits: QBER {qber:.2}%, sifted {sifted:.3} bps, secure/sifted {yield_:.3}, {elapsed:.1} s",
            r.sifted_bits
        ),
    )
}

fn log_of(times: &[f64]) -> EventLog {
    let mut log = EventLog::empty(0, 1e9, 1.0);
    log.events = times
        .iter()
        .map(|&t| DetectionEvent {
            time_ns: t,
            channel: 0,
            cause: ClickCause::Photon,
        })
        .collect();
    log
}

fn sorted_times(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 40.0).round() / 4.0).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn gaussian_fwhm(sigma: f64, events: usize, bin: f64, rng: &mut ChaCha8Rng) -> f64 {
    let normal = rand_distr::Normal::new(0.0, sigma).expect("valid normal");
    let bins = (16.0 * sigma / bin).ceil() as usize;
    let mut counts = vec![0u64; bins];
    for _ in 0..events {
        let x: f64 = rand_distr::Distribution::sample(&normal, rng) + 8.0 * sigma;
        if x >= 0.0 && ((x / bin) as usize) < bins {
            counts[(x / bin) as usize] += 1;
        }
    }
    fwhm(&Histogram {
        bin_width_ps: bin,
        origin_ps: 0.0,
        counts,
    })
    .unwrap_or(f64::NAN)
}

fn property_suites() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut results = Vec::new();

    let mut cfg = defaults().bb84.expect("bb84 section");
    cfg.slots = 2_000_000;
    let csv = |log: &EventLog| {
        let mut buf = Vec::new();
        log.write_csv(&mut buf).map(|_| buf).map_err(|e| e.to_string())
    };
    let a = csv(&run_bb84(&cfg, 9).map_err(|e| e.to_string())?)?;
    let b = csv(&run_bb84(&cfg, 9).map_err(|e| e.to_string())?)?;
    let c = csv(&run_bb84(&cfg, 10).map_err(|e| e.to_string())?)?;
    results.push(("determinism", a == b && a != c));

    let mut matcher = true;
    for _ in 0..200 {
        let na = rng.random_range(0..12);
        let nb = rng.random_range(0..12);
        let la = log_of(&sorted_times(&mut rng, na));
        let lb = log_of(&sorted_times(&mut rng, nb));
        let w = rng.random_range(0..8) as f64 * 0.25;
        let fast = coincidences(&la, &lb, w).map_err(|e| e.to_string())?;
        matcher &= fast == coincidences_brute_force(&la, &lb, w);
    }
    results.push(("matcher equals brute force", matcher));

    let mut entropy = binary_entropy(0.5) == Ok(1.0)
        && binary_entropy(0.0) == Ok(0.0)
        && binary_entropy(1.0) == Ok(0.0);
    for i in 0..=1000 {
        let p = i as f64 / 1000.0;
        let (h, hc) = (binary_entropy(p).unwrap(), binary_entropy(1.0 - p).unwrap());
        entropy &= (h - hc).abs() < 1e-12 && (0.0..=1.0).contains(&h);
    }
    results.push(("entropy symmetry and extrema", entropy));

    let mut monotone = true;
    for id in ["A", "B", "ref25", "field"] {
        let dev = builtin_device(id).map_err(|e| e.to_string())?;
        let wl = dev.calibration_lines()[0];
        for _ in 0..50 {
            let mut grid: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
            grid.sort_by(f64::total_cmp);
            for w in grid.windows(2) {
                monotone &= efficiency_at_bias(&dev, w[0], wl).unwrap()
                    <= efficiency_at_bias(&dev, w[1], wl).unwrap()
                    && dark_rate_at_bias(&dev, w[0]).unwrap() <= dark_rate_at_bias(&dev, w[1]).unwrap();
            }
        }
    }
    results.push(("efficiency and dark-rate monotonicity", monotone));

    let sigma = 42.47;
    let coarse = (gaussian_fwhm(sigma, 10_000, 8.0, &mut rng) - 2.3548 * sigma).abs();
    let fine = (gaussian_fwhm(sigma, 10_000_000, 2.0, &mut rng) - 2.3548 * sigma).abs();
    results.push(("jitter FWHM convergence", fine < 1.0 && fine <= coarse.max(1.0)));

    let (mu, t, n) = (0.4, 0.3, 200_000);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..n {
        let pulse = wcp_emit(mu, 0.0, 1550.0, &mut rng).map_err(|e| e.to_string())?;
        let k = f64::from(attenuate(&pulse, t, &mut rng).map_err(|e| e.to_string())?.n_photons);
        sum += k;
        sum2 += k * k;
    }
    let mean = sum / n as f64;
    let var = sum2 / n as f64 - mean * mean;
    let m = mu * t;
    let moments = (mean - m).abs() < 4.0 * (m / n as f64).sqrt()
        && (var - m).abs() < 4.0 * ((m + 2.0 * m * m) / n as f64).sqrt();
    results.push(("thinned Poisson moments", moments));

    let elapsed = start.elapsed().as_secs_f64();
    let failed: Vec<&str> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    check(
        failed.is_empty() && elapsed < 30.0,
        format!(
            "{} suites, failed: [{}], {elapsed:.1} s",
            results.len(),
            failed.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("performance index reproduction", performance_index),
        ("operating-point calibration", operating_point),
        ("jitter pipeline", jitter_pipeline),
        ("count-rate limit", count_rate_limit),
        ("Monte Carlo and analytic equivalence", monte_carlo_equivalence),
        ("decoy soundness sweep", decoy_soundness),
        ("BB84 field-test reproduction", bb84_field_test),
        ("BBM92 reproduction", bbm92_reproduction),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
