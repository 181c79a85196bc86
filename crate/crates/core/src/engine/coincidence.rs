use serde::{Deserialize, Serialize};

use super::EventLog;
use crate::error::ModelError;

/// Indices of two matched clicks, into `log_a.events` and `log_b.events`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoincidencePair {
    pub a: usize,
    pub b: usize,
}

fn check_sorted(log: &EventLog) -> Result<(), ModelError> {
    for w in log.events.windows(2) {
        if !(w[1].time_ns >= w[0].time_ns) {
            return Err(ModelError::Sequencing {
                time_ns: w[1].time_ns,
                previous_ns: w[0].time_ns,
            });
        }
    }
    Ok(())
}

/// Greedy earliest-first one-to-one matching.
///
/// Clicks of `log_a` are taken in time order; each is paired with the
/// earliest still-unmatched click of `log_b` within `window_ns`.
pub fn coincidences(
    log_a: &EventLog,
    log_b: &EventLog,
    window_ns: f64,
) -> Result<Vec<CoincidencePair>, ModelError> {
    if !(window_ns >= 0.0) {
        return Err(ModelError::Domain {
            name: "window_ns",
            value: window_ns,
            domain: "[0, inf)",
        });
    }
    check_sorted(log_a)?;
    check_sorted(log_b)?;
    let b = &log_b.events;
    let mut taken = vec![false; b.len()];
    let mut start = 0;
    let mut pairs = Vec::new();
    for (i, ea) in log_a.events.iter().enumerate() {
        while start < b.len() && (b[start].time_ns < ea.time_ns - window_ns || taken[start]) {
            start += 1;
        }
        let mut j = start;
        while j < b.len() && b[j].time_ns <= ea.time_ns + window_ns {
            if !taken[j] && (b[j].time_ns - ea.time_ns).abs() <= window_ns {
                taken[j] = true;
                pairs.push(CoincidencePair { a: i, b: j });
                break;
            }
            j += 1;
        }
    }
    Ok(pairs)
}

/// Quadratic reference implementation of [`coincidences`].
pub fn coincidences_brute_force(
    log_a: &EventLog,
    log_b: &EventLog,
    window_ns: f64,
) -> Vec<CoincidencePair> {
    let mut taken = vec![false; log_b.events.len()];
    let mut pairs = Vec::new();
    for (i, ea) in log_a.events.iter().enumerate() {
        for (j, eb) in log_b.events.iter().enumerate() {
            if !taken[j] && (eb.time_ns - ea.time_ns).abs() <= window_ns {
                taken[j] = true;
                pairs.push(CoincidencePair { a: i, b: j });
                break;
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{ClickCause, DetectionEvent};

    fn log(times: &[f64]) -> EventLog {
        let mut l = EventLog::empty(0, 1e6, 1.0);
        l.events = times
            .iter()
            .map(|&t| DetectionEvent {
                time_ns: t,
                channel: 0,
                cause: ClickCause::Dark,
            })
            .collect();
        l
    }

    #[test]
    fn empty_logs() {
        assert!(coincidences(&log(&[]), &log(&[1.0]), 1.0).unwrap().is_empty());
        assert!(coincidences(&log(&[1.0]), &log(&[]), 1.0).unwrap().is_empty());
    }

    #[test]
    fn one_to_one() {
        let p = coincidences(&log(&[0.0, 0.1]), &log(&[0.05]), 0.2).unwrap();
        assert_eq!(p, vec![CoincidencePair { a: 0, b: 0 }]);
    }

    #[test]
    fn unsorted_rejected() {
        let err = coincidences(&log(&[2.0, 1.0]), &log(&[1.0]), 0.2);
        assert!(matches!(err, Err(ModelError::Sequencing { .. })));
    }
}
