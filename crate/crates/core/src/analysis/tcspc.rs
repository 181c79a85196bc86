use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::config::JitterConfig;
use crate::detector::{efficiency_at_bias, DetectionEvent, DetectorChannel, RecoveryMode};
use crate::engine::zero_truncated_poisson;
use crate::error::{ModelError, Result};
use crate::optical::PhotonArrival;
use crate::rng::{Role, SessionStreams};

const PHASE_SNAP_PS: f64 = 1e-6;

/// Counts of folded click times in equal bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_ps: f64,
    /// Left edge of bin 0.
    pub origin_ps: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.origin_ps + (i as f64 + 0.5) * self.bin_width_ps
    }

    /// CSV with header `bin_center_ps,counts`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_center_ps", "counts"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([format!("{:.3}", self.bin_center(i)), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fold click times modulo the sync period and bin them.
///
/// Bin 0 starts at sync phase 0; the last bin may be narrower than the
/// others when the period is not a multiple of the bin width.
pub fn tcspc_histogram(
    events: &[DetectionEvent],
    sync_rate_hz: f64,
    bin_width_ps: f64,
) -> Result<Histogram, ModelError> {
    if !(sync_rate_hz > 0.0 && sync_rate_hz.is_finite()) {
        return Err(ModelError::Domain {
            name: "sync_rate_hz",
            value: sync_rate_hz,
            domain: "(0, inf)",
        });
    }
    if !(bin_width_ps > 0.0) {
        return Err(ModelError::Domain {
            name: "bin_width_ps",
            value: bin_width_ps,
            domain: "(0, inf)",
        });
    }
    if events.is_empty() {
        return Err(ModelError::EmptyInput("no events to histogram"));
    }
    let period_ps = 1e12 / sync_rate_hz;
    let bins = (period_ps / bin_width_ps).ceil() as usize;
    let mut counts = vec![0u64; bins];
    for e in events {
        let mut phase = (e.time_ns * 1e3).rem_euclid(period_ps);
        // rounding of whole periods can leave a phase just below the period
        if period_ps - phase < PHASE_SNAP_PS {
            phase = 0.0;
        }
        let i = ((phase / bin_width_ps) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        bin_width_ps,
        origin_ps: 0.0,
        counts,
    })
}

/// Full width at half maximum with linear interpolation between bin centers.
///
/// The region at or above half maximum must be a single contiguous run of
/// bins around the peak that does not span the whole histogram. Counts beyond
/// either end are taken as zero, so a single-bin spike is one bin wide.
pub fn fwhm(histogram: &Histogram) -> Result<f64, ModelError> {
    let c = &histogram.counts;
    let Some((peak, &max)) = c.iter().enumerate().max_by_key(|&(i, &v)| (v, std::cmp::Reverse(i)))
    else {
        return Err(ModelError::IllDefinedPeak("histogram has no bins"));
    };
    if max == 0 {
        return Err(ModelError::IllDefinedPeak("histogram is empty"));
    }
    let half = max as f64 / 2.0;
    let above = |i: usize| c[i] as f64 >= half;
    let mut left = peak;
    while left > 0 && above(left - 1) {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < c.len() && above(right + 1) {
        right += 1;
    }
    if left == 0 && right + 1 == c.len() {
        return Err(ModelError::IllDefinedPeak("histogram is flat at half maximum"));
    }
    if (0..left).chain(right + 1..c.len()).any(above) {
        return Err(ModelError::IllDefinedPeak("more than one region above half maximum"));
    }
    let w = histogram.bin_width_ps;
    let count = |i: isize| -> f64 {
        if i < 0 || i as usize >= c.len() {
            0.0
        } else {
            c[i as usize] as f64
        }
    };
    let crossing = |inside: isize, outside: isize| -> f64 {
        let (ci, co) = (count(inside), count(outside));
        let xo = histogram.origin_ps + (outside as f64 + 0.5) * w;
        let xi = histogram.origin_ps + (inside as f64 + 0.5) * w;
        xo + (half - co) / (ci - co) * (xi - xo)
    };
    let x_left = crossing(left as isize, left as isize - 1);
    let x_right = crossing(right as isize, right as isize + 1);
    Ok(x_right - x_left)
}

/// Outcome of a simulated TCSPC jitter measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterRun {
    pub device: String,
    pub sync_rate_hz: f64,
    pub pulses: u64,
    pub clicks: u64,
    pub photon_clicks: u64,
    pub dark_clicks: u64,
    pub bin_width_ps: f64,
    pub fwhm_ps: f64,
    /// Jitter FWHM configured on the device.
    pub device_fwhm_ps: f64,
    pub histogram: Histogram,
}

/// Simulate a pulsed-laser jitter measurement until `cfg.clicks` clicks have
/// been collected, then histogram them against the sync.
///
/// Pulses arrive at the middle of each sync period with Poissonian photon
/// number of mean `photon_flux / sync_rate`.
pub fn run_jitter(cfg: &JitterConfig, seed: u64) -> Result<JitterRun> {
    if cfg.clicks == 0 {
        return Err(ModelError::EmptyInput("jitter run needs at least one click").into());
    }
    let streams = SessionStreams::new(seed);
    let period = 1e9 / cfg.sync_rate_hz;
    let mean = cfg.photon_flux_cps / cfg.sync_rate_hz;
    let eta = efficiency_at_bias(&cfg.device, cfg.bias_ratio, cfg.wavelength_nm)?
        * cfg.device.polarization_coupling;
    let lambda = mean * eta;
    if !(lambda > 0.0) {
        return Err(ModelError::Parameter("jitter run needs a nonzero detection probability".into()).into());
    }
    let p_pulse = -(-lambda).exp_m1();
    let pulses = ((cfg.clicks as f64 / p_pulse) * 1.1).ceil() as u64 + 1000;
    let window = (-period / 2.0, (pulses as f64 - 0.5) * period);
    let mut det = DetectorChannel::new(
        cfg.device.clone(),
        cfg.bias_ratio,
        0,
        RecoveryMode::Exponential,
        window,
        &streams,
    )?;
    let gap = Geometric::new(p_pulse).map_err(|e| ModelError::Parameter(format!("pulse skip: {e}")))?;
    let mut scheduler = streams.stream(Role::Scheduler);
    let mut k = gap.sample(&mut scheduler);
    let mut offered = 0u64;
    while k < pulses && offered < cfg.clicks * 2 {
        let n = zero_truncated_poisson(lambda, scheduler.random());
        let mut arrival = PhotonArrival::new((k as f64 + 0.5) * period, n, cfg.wavelength_nm);
        arrival.prethinned_efficiency = Some(eta);
        if det.offer(&arrival)?.is_some() {
            offered += 1;
        }
        k = k.saturating_add(1).saturating_add(gap.sample(&mut scheduler));
    }
    let mut events = det.finish()?;
    events.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));
    events.truncate(cfg.clicks as usize);
    let histogram = tcspc_histogram(&events, cfg.sync_rate_hz, cfg.bin_width_ps)?;
    let fwhm_ps = fwhm(&histogram)?;
    let photon_clicks = events
        .iter()
        .filter(|e| e.cause == crate::detector::ClickCause::Photon)
        .count() as u64;
    Ok(JitterRun {
        device: cfg.device.id.clone(),
        sync_rate_hz: cfg.sync_rate_hz,
        pulses: events.last().map_or(0, |e| (e.time_ns / period).ceil() as u64),
        clicks: events.len() as u64,
        photon_clicks,
        dark_clicks: events.len() as u64 - photon_clicks,
        bin_width_ps: cfg.bin_width_ps,
        fwhm_ps,
        device_fwhm_ps: cfg.device.jitter_fwhm_ps,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::ClickCause;

    fn hist(counts: Vec<u64>) -> Histogram {
        Histogram {
            bin_width_ps: 4.0,
            origin_ps: 0.0,
            counts,
        }
    }

    fn event(time_ns: f64) -> DetectionEvent {
        DetectionEvent {
            time_ns,
            channel: 0,
            cause: ClickCause::Photon,
        }
    }

    #[test]
    fn spike_is_one_bin_wide() {
        assert_eq!(fwhm(&hist(vec![0, 0, 50, 0, 0])).unwrap(), 4.0);
        assert_eq!(fwhm(&hist(vec![50, 0, 0])).unwrap(), 4.0);
    }

    #[test]
    fn triangle_width() {
        // peak 10 at bin 5, falling 2 per bin: half max 5 is 2.5 bins out
        let counts = vec![0, 0, 4, 6, 8, 10, 8, 6, 4, 0, 0];
        let width = fwhm(&hist(counts)).unwrap();
        assert!((width - 2.0 * 2.5 * 4.0).abs() < 1e-12, "{width}");
    }

    #[test]
    fn ill_defined_peaks() {
        assert!(matches!(fwhm(&hist(vec![5, 5, 5])), Err(ModelError::IllDefinedPeak(_))));
        assert!(matches!(fwhm(&hist(vec![0, 9, 0, 0, 8, 0])), Err(ModelError::IllDefinedPeak(_))));
        assert!(matches!(fwhm(&hist(vec![0, 0])), Err(ModelError::IllDefinedPeak(_))));
    }

    #[test]
    fn sampled_gaussian_width() {
        let sigma = 42.47;
        let counts = (0..200)
            .map(|i| {
                let x = (i as f64 + 0.5) * 4.0 - 400.0;
                (1e6 * (-0.5 * (x / sigma).powi(2)).exp()).round() as u64
            })
            .collect();
        let width = fwhm(&hist(counts)).unwrap();
        assert!((width - 100.0).abs() <= 4.0, "{width}");
    }

    #[test]
    fn folding_conserves_and_aligns() {
        let events: Vec<_> = (0..100).map(|k| event(k as f64 * 1000.0 / 33.0)).collect();
        let h = tcspc_histogram(&events, 33e6, 4.0).unwrap();
        assert_eq!(h.total(), 100);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts.len(), 7576);
        assert!(tcspc_histogram(&[], 33e6, 4.0).is_err());
    }
}
