use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Transmitter, TransmitterRecord, TxChoice};
use crate::engine::EventLog;
use crate::error::ModelError;
use crate::optical::{Basis, IntensityLabel};

/// Something that knows the sender's choice at any slot.
pub trait SlotChoices {
    fn choice(&mut self, slot: u64) -> TxChoice;
}

impl SlotChoices for Transmitter {
    fn choice(&mut self, slot: u64) -> TxChoice {
        self.at(slot)
    }
}

impl SlotChoices for TransmitterRecord {
    fn choice(&mut self, slot: u64) -> TxChoice {
        self.choices[slot as usize]
    }
}

/// A slot in which the receiver registered at least one in-gate click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RxDetection {
    pub slot: u64,
    pub basis: Basis,
    pub bit: u8,
    pub double_click: bool,
}

/// In-gate clicks of a two-detector receiver grouped by slot.
///
/// Channel 0 reads bit 0 and channel 1 bit 1. When both fire in one slot the
/// bit is drawn from `rng`. Clicks outside `[0, slots)` are dropped.
pub fn receiver_detections<R: Rng + ?Sized>(
    log: &EventLog,
    mut basis_at: impl FnMut(u64) -> Basis,
    rng: &mut R,
) -> Vec<RxDetection> {
    let mut per_slot: Vec<(u64, [bool; 2])> = Vec::new();
    for e in &log.events {
        let bin = log.time_bin(e.time_ns);
        if !bin.within_gate || bin.slot_index < 0 || bin.slot_index as u64 >= log.slots {
            continue;
        }
        let slot = bin.slot_index as u64;
        let ch = usize::from(e.channel & 1);
        match per_slot.last_mut() {
            Some((s, fired)) if *s == slot => fired[ch] = true,
            _ => {
                let mut fired = [false; 2];
                fired[ch] = true;
                per_slot.push((slot, fired));
            }
        }
    }
    per_slot
        .into_iter()
        .map(|(slot, fired)| {
            let double_click = fired[0] && fired[1];
            let bit = if double_click {
                u8::from(rng.random::<bool>())
            } else {
                u8::from(fired[1])
            };
            RxDetection {
                slot,
                basis: basis_at(slot),
                bit,
                double_click,
            }
        })
        .collect()
}

/// Basis-matched detections with both parties' bits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SiftedKey {
    /// Receiver bits.
    pub bits: Vec<u8>,
    /// Sender bits at the same positions.
    pub reference: Vec<u8>,
    pub positions: Vec<u64>,
    pub intensities: Vec<IntensityLabel>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Indices of the key bits sent at one intensity.
    pub fn partition(&self, label: IntensityLabel) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.intensities[i] == label)
            .collect()
    }

    pub fn errors(&self) -> usize {
        self.bits
            .iter()
            .zip(&self.reference)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Keep exactly the detections whose basis matches the sender's.
pub fn sift<T: SlotChoices + ?Sized>(tx: &mut T, detections: &[RxDetection]) -> SiftedKey {
    let mut key = SiftedKey::default();
    for d in detections {
        let c = tx.choice(d.slot);
        if c.basis == d.basis {
            key.bits.push(d.bit);
            key.reference.push(c.bit);
            key.positions.push(d.slot);
            key.intensities.push(c.intensity);
        }
    }
    key
}

/// Disagreement fraction between two equally long bit strings.
pub fn qber(reference: &[u8], measured: &[u8]) -> Result<f64, ModelError> {
    if reference.len() != measured.len() {
        return Err(ModelError::Parameter(format!(
            "bit strings differ in length: {} vs {}",
            reference.len(),
            measured.len()
        )));
    }
    if reference.is_empty() {
        return Err(ModelError::Undefined("QBER of an empty key"));
    }
    let errors = reference.iter().zip(measured).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / reference.len() as f64)
}

/// QBER over the full sifted key.
pub fn estimate_qber(key: &SiftedKey) -> Result<f64, ModelError> {
    qber(&key.reference, &key.bits)
}

/// QBER over a random disclosed subset of `fraction` of the key.
pub fn estimate_qber_sampled<R: Rng + ?Sized>(
    key: &SiftedKey,
    fraction: f64,
    rng: &mut R,
) -> Result<f64, ModelError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(ModelError::Domain {
            name: "fraction",
            value: fraction,
            domain: "(0, 1]",
        });
    }
    if key.is_empty() {
        return Err(ModelError::Undefined("QBER of an empty key"));
    }
    let n = ((key.len() as f64 * fraction).round() as usize).clamp(1, key.len());
    let idx = sample(rng, key.len(), n);
    let errors = idx.iter().filter(|&i| key.bits[i] != key.reference[i]).count();
    Ok(errors as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(bases: &[Basis]) -> TransmitterRecord {
        TransmitterRecord {
            choices: bases
                .iter()
                .enumerate()
                .map(|(i, &basis)| TxChoice {
                    bit: (i % 2) as u8,
                    basis,
                    intensity: IntensityLabel::Signal,
                })
                .collect(),
        }
    }

    #[test]
    fn forced_equal_bases_keep_everything() {
        let mut tx = record(&[Basis::Z; 10]);
        let det: Vec<RxDetection> = (0..10)
            .step_by(2)
            .map(|slot| RxDetection {
                slot,
                basis: Basis::Z,
                bit: 0,
                double_click: false,
            })
            .collect();
        assert_eq!(sift(&mut tx, &det).len(), det.len());
        assert!(sift(&mut tx, &[]).is_empty());
    }

    #[test]
    fn qber_by_construction() {
        let a = vec![0u8; 1000];
        let mut b = a.clone();
        assert_eq!(qber(&a, &b).unwrap(), 0.0);
        for x in b.iter_mut().take(29) {
            *x = 1;
        }
        assert!((qber(&a, &b).unwrap() - 0.029).abs() < 1e-15);
        let c: Vec<u8> = a.iter().map(|x| 1 - x).collect();
        assert_eq!(qber(&a, &c).unwrap(), 1.0);
        assert!(matches!(qber(&[], &[]), Err(ModelError::Undefined(_))));
    }

    #[test]
    fn sampled_estimate_on_full_fraction_is_exact() {
        let key = SiftedKey {
            bits: vec![0, 1, 1, 0],
            reference: vec![0, 1, 0, 0],
            positions: vec![0, 1, 2, 3],
            intensities: vec![IntensityLabel::Signal; 4],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(estimate_qber_sampled(&key, 1.0, &mut rng).unwrap(), 0.25);
        assert!(estimate_qber_sampled(&key, 0.0, &mut rng).is_err());
    }
}
