use serde::{Deserialize, Serialize};

use crate::optical::{Basis, IntensityLabel, IntensitySet};
use crate::rng::{unit_f64, Role, SessionStreams, SlotWords};

/// The sender's choices for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxChoice {
    pub bit: u8,
    pub basis: Basis,
    pub intensity: IntensityLabel,
}

impl TxChoice {
    /// Decode one slot word: bit 0 is the key bit, bit 1 the basis, and the
    /// top 53 bits select the intensity.
    pub fn from_word(word: u64, set: &IntensitySet) -> Self {
        Self {
            bit: (word & 1) as u8,
            basis: Basis::from_bit(word >> 1),
            intensity: set.select(unit_f64(word)),
        }
    }
}

/// Per-slot sender choices, regenerable at any slot from the session seed.
#[derive(Debug, Clone)]
pub struct Transmitter {
    set: IntensitySet,
    words: SlotWords,
}

impl Transmitter {
    pub fn new(streams: &SessionStreams, set: IntensitySet) -> Self {
        Self {
            set,
            words: streams.slot_words(Role::Transmitter),
        }
    }

    /// Choice of the next slot in sequence.
    pub fn next(&mut self) -> TxChoice {
        TxChoice::from_word(self.words.next(), &self.set)
    }

    /// Choice of an arbitrary slot.
    pub fn at(&mut self, slot: u64) -> TxChoice {
        TxChoice::from_word(self.words.at(slot), &self.set)
    }

    pub fn intensities(&self) -> &IntensitySet {
        &self.set
    }
}

/// Per-slot measurement basis of a receiver.
#[derive(Debug, Clone)]
pub struct BasisChooser {
    words: SlotWords,
}

impl BasisChooser {
    pub fn new(streams: &SessionStreams, role: Role) -> Self {
        Self {
            words: streams.slot_words(role),
        }
    }

    pub fn at(&mut self, slot: u64) -> Basis {
        Basis::from_bit(self.words.at(slot))
    }
}

/// Stored per-slot sender choices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransmitterRecord {
    pub choices: Vec<TxChoice>,
}

impl TransmitterRecord {
    /// The first `slots` choices of a session.
    pub fn generate(streams: &SessionStreams, set: IntensitySet, slots: usize) -> Self {
        let mut tx = Transmitter::new(streams, set);
        Self {
            choices: (0..slots).map(|_| tx.next()).collect(),
        }
    }

    /// Count of slots per intensity label.
    pub fn label_counts(&self) -> [u64; 3] {
        let mut c = [0; 3];
        for ch in &self.choices {
            c[ch.intensity.index()] += 1;
        }
        c
    }
}
