//! Named, counter-based random streams.
//!
//! Every session derives one ChaCha8 stream per [`Role`] from its seed. Roles
//! never share a stream, so adding draws to one party's logic does not perturb
//! any other party. Streams that carry exactly one 64-bit word per slot (the
//! basis and intensity choices) are also addressable by slot index through
//! [`SlotWords`], which lets the sifting stage regenerate any choice without
//! storing it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent randomness consumers inside one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Sender choices (bit, basis, intensity); one word per slot.
    Transmitter,
    /// Receiver basis choice (BB84 Bob, BBM92 Alice); one word per slot.
    ReceiverBasis,
    /// Second receiver basis choice (BBM92 Bob); one word per slot.
    PartnerBasis,
    /// Photon-number sampling at the source.
    Source,
    /// Loss in the fiber channel (arm index for two-arm links).
    Channel(u8),
    /// Routing of photons onto detectors inside a receiver.
    Routing(u8),
    /// Click decisions and timing jitter of one detector.
    Detector(u16),
    /// Dark-count process of one detector.
    Dark(u16),
    /// Tie-breaking randomness during sifting (double clicks, sampling).
    Sifting,
    /// Scheduling of event-driven sessions.
    Scheduler,
}

impl Role {
    fn stream_id(self) -> u64 {
        match self {
            Role::Transmitter => 1,
            Role::ReceiverBasis => 2,
            Role::PartnerBasis => 3,
            Role::Source => 4,
            Role::Sifting => 5,
            Role::Scheduler => 6,
            Role::Channel(arm) => 0x100 | u64::from(arm),
            Role::Routing(arm) => 0x200 | u64::from(arm),
            Role::Detector(ch) => 0x1_0000 | u64::from(ch),
            Role::Dark(ch) => 0x2_0000 | u64::from(ch),
        }
    }
}

/// Factory for the per-role streams of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionStreams {
    seed: u64,
}

impl SessionStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh sequential stream for `role`, positioned at word 0.
    pub fn stream(&self, role: Role) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(role.stream_id());
        rng
    }

    pub fn slot_words(&self, role: Role) -> SlotWords {
        SlotWords {
            rng: self.stream(role),
        }
    }
}

/// Random access to a stream that carries one `u64` per slot.
///
/// `at(i)` returns the same word that the `i`-th call of `next()` on a fresh
/// stream would return.
#[derive(Debug, Clone)]
pub struct SlotWords {
    rng: ChaCha8Rng,
}

impl SlotWords {
    pub fn at(&mut self, slot: u64) -> u64 {
        let pos = u128::from(slot) * 2;
        if self.rng.get_word_pos() != pos {
            self.rng.set_word_pos(pos);
        }
        self.rng.next_u64()
    }

    pub fn next(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Uniform `[0, 1)` from the top 53 bits of a word.
pub(crate) fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential_draws() {
        let streams = SessionStreams::new(42);
        let mut seq = streams.slot_words(Role::Transmitter);
        let words: Vec<u64> = (0..300).map(|_| seq.next()).collect();
        let mut ra = streams.slot_words(Role::Transmitter);
        for &i in &[0u64, 7, 299, 3, 150, 151, 64, 0] {
            assert_eq!(ra.at(i), words[i as usize]);
        }
    }

    #[test]
    fn roles_are_independent() {
        let streams = SessionStreams::new(7);
        let mut a = streams.stream(Role::Detector(0));
        let mut b = streams.stream(Role::Detector(1));
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn unit_f64_is_half_open() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }
}
