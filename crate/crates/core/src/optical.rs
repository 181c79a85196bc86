//! Photon sources and the fiber channel.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{check_fraction, ModelError};

/// Conjugate measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn from_bit(bit: u64) -> Self {
        if bit & 1 == 0 {
            Basis::Z
        } else {
            Basis::X
        }
    }

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }
}

/// Intensity class of a decoy-modulated pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityLabel {
    Signal,
    Decoy,
    Vacuum,
}

impl IntensityLabel {
    pub const ALL: [IntensityLabel; 3] = [
        IntensityLabel::Signal,
        IntensityLabel::Decoy,
        IntensityLabel::Vacuum,
    ];

    pub fn index(self) -> usize {
        match self {
            IntensityLabel::Signal => 0,
            IntensityLabel::Decoy => 1,
            IntensityLabel::Vacuum => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntensityLabel::Signal => "signal",
            IntensityLabel::Decoy => "decoy",
            IntensityLabel::Vacuum => "vacuum",
        }
    }
}

/// Outcomes one photon of an entangled pair yields in each basis, indexed by
/// [`Basis::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTag {
    pub outcomes: [u8; 2],
}

impl PairTag {
    pub fn outcome(&self, basis: Basis) -> u8 {
        self.outcomes[basis.index()]
    }
}

/// An optical pulse at a point of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonArrival {
    pub time_ns: f64,
    pub n_photons: u32,
    pub wavelength_nm: f64,
    pub intensity: Option<IntensityLabel>,
    pub basis: Option<Basis>,
    pub bit: Option<u8>,
    pub polarization_mismatch: f64,
    /// One tag per photon when the photons come from entangled pairs.
    pub pairs: SmallVec<[PairTag; 2]>,
    /// Set when the emission window held more than one pair.
    pub multi_pair: bool,
    /// Detector-efficiency fraction already applied upstream by thinning.
    pub prethinned_efficiency: Option<f64>,
}

impl PhotonArrival {
    pub fn new(time_ns: f64, n_photons: u32, wavelength_nm: f64) -> Self {
        Self {
            time_ns,
            n_photons,
            wavelength_nm,
            intensity: None,
            basis: None,
            bit: None,
            polarization_mismatch: 0.0,
            pairs: SmallVec::new(),
            multi_pair: false,
            prethinned_efficiency: None,
        }
    }

    /// Same metadata with a different photon count.
    pub fn with_photons(&self, n_photons: u32) -> Self {
        Self {
            n_photons,
            pairs: SmallVec::new(),
            ..self.clone()
        }
    }
}

fn zero() -> f64 {
    0.0
}

/// Loss budget of a fiber span plus fixed losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub length_km: f64,
    pub loss_db_per_km: f64,
    #[serde(default = "zero")]
    pub excess_loss_db: f64,
    #[serde(default = "zero")]
    pub receiver_loss_db: f64,
}

impl ChannelSpec {
    pub fn lossless() -> Self {
        Self {
            length_km: 0.0,
            loss_db_per_km: 0.0,
            excess_loss_db: 0.0,
            receiver_loss_db: 0.0,
        }
    }

    pub fn fiber(length_km: f64, loss_db_per_km: f64) -> Self {
        Self {
            length_km,
            loss_db_per_km,
            ..Self::lossless()
        }
    }

    pub fn total_loss_db(&self) -> f64 {
        self.loss_db_per_km * self.length_km + self.excess_loss_db + self.receiver_loss_db
    }

    /// Two spans in series. Lengths add only when the attenuation matches;
    /// otherwise the second span is folded into the excess loss.
    pub fn concat(&self, other: &ChannelSpec) -> ChannelSpec {
        if self.loss_db_per_km == other.loss_db_per_km {
            ChannelSpec {
                length_km: self.length_km + other.length_km,
                loss_db_per_km: self.loss_db_per_km,
                excess_loss_db: self.excess_loss_db + other.excess_loss_db,
                receiver_loss_db: self.receiver_loss_db + other.receiver_loss_db,
            }
        } else {
            ChannelSpec {
                excess_loss_db: self.excess_loss_db
                    + other.loss_db_per_km * other.length_km
                    + other.excess_loss_db,
                receiver_loss_db: self.receiver_loss_db + other.receiver_loss_db,
                ..*self
            }
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), Vec<String>> {
        let mut v = Vec::new();
        for (field, value) in [
            ("length_km", self.length_km),
            ("loss_db_per_km", self.loss_db_per_km),
            ("excess_loss_db", self.excess_loss_db),
            ("receiver_loss_db", self.receiver_loss_db),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                v.push(format!("channel `{name}`: {field} must be non-negative, got {value}"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

/// End-to-end power transmittance of a channel.
pub fn fiber_transmittance(spec: &ChannelSpec) -> f64 {
    10f64.powf(-spec.total_loss_db() / 10.0)
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u32, ModelError> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(ModelError::Domain {
            name: "mean photon number",
            value: mean,
            domain: "[0, inf)",
        });
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| ModelError::Parameter(e.to_string()))?;
    Ok(d.sample(rng) as u32)
}

/// Weak coherent pulse: Poissonian photon number of the given mean.
pub fn wcp_emit<R: Rng + ?Sized>(
    intensity: f64,
    time_ns: f64,
    wavelength_nm: f64,
    rng: &mut R,
) -> Result<PhotonArrival, ModelError> {
    let n = sample_poisson(intensity, rng)?;
    Ok(PhotonArrival::new(time_ns, n, wavelength_nm))
}

/// Independent survival of every photon with probability `transmittance`.
pub fn attenuate<R: Rng + ?Sized>(
    arrival: &PhotonArrival,
    transmittance: f64,
    rng: &mut R,
) -> Result<PhotonArrival, ModelError> {
    check_fraction("transmittance", transmittance)?;
    let mut out = arrival.clone();
    if !arrival.pairs.is_empty() {
        out.pairs.retain(|_| rng.random::<f64>() < transmittance);
        out.n_photons = out.pairs.len() as u32;
        return Ok(out);
    }
    if arrival.n_photons == 0 || transmittance == 1.0 {
        return Ok(out);
    }
    let d = Binomial::new(u64::from(arrival.n_photons), transmittance)
        .map_err(|e| ModelError::Parameter(e.to_string()))?;
    out.n_photons = d.sample(rng) as u32;
    Ok(out)
}

fn default_intensities() -> [f64; 3] {
    [0.4, 0.15, 0.0]
}

fn default_probabilities() -> [f64; 3] {
    [0.5, 0.25, 0.25]
}

/// Decoy intensity set: mean photon numbers and selection probabilities in
/// (signal, decoy, vacuum) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensitySet {
    #[serde(default = "default_intensities")]
    pub mean_photons: [f64; 3],
    #[serde(default = "default_probabilities")]
    pub probabilities: [f64; 3],
}

impl Default for IntensitySet {
    fn default() -> Self {
        Self {
            mean_photons: default_intensities(),
            probabilities: default_probabilities(),
        }
    }
}

impl IntensitySet {
    pub fn mean(&self, label: IntensityLabel) -> f64 {
        self.mean_photons[label.index()]
    }

    pub fn probability(&self, label: IntensityLabel) -> f64 {
        self.probabilities[label.index()]
    }

    /// Only one intensity class, always selected.
    pub fn only(label: IntensityLabel, mean_photons: [f64; 3]) -> Self {
        let mut probabilities = [0.0; 3];
        probabilities[label.index()] = 1.0;
        Self {
            mean_photons,
            probabilities,
        }
    }

    /// Label selected by a uniform variate in `[0, 1)`.
    pub fn select(&self, u: f64) -> IntensityLabel {
        let mut acc = 0.0;
        for label in IntensityLabel::ALL {
            acc += self.probability(label);
            if u < acc {
                return label;
            }
        }
        // rounding in the cumulative sum
        IntensityLabel::ALL
            .into_iter()
            .rev()
            .find(|&l| self.probability(l) > 0.0)
            .unwrap_or(IntensityLabel::Vacuum)
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut v = Vec::new();
        let [mu, nu, vac] = self.mean_photons;
        if !(mu > nu && nu > 0.0) {
            v.push(format!("intensities: need signal > decoy > 0, got {mu}, {nu}"));
        }
        if vac != 0.0 {
            v.push(format!("intensities: vacuum mean photon number must be 0, got {vac}"));
        }
        if self.probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            v.push("intensities: probabilities must lie in [0, 1]".to_string());
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            v.push(format!("intensities: probabilities sum to {total}, not 1"));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }
}

/// Decoy-modulated weak coherent source; every emitted pulse carries its label.
#[derive(Debug, Clone)]
pub struct DecoySource {
    set: IntensitySet,
    wavelength_nm: f64,
    samplers: [Option<Poisson<f64>>; 3],
}

impl DecoySource {
    pub fn new(set: IntensitySet, wavelength_nm: f64) -> Result<Self, ModelError> {
        let mut samplers = [None, None, None];
        for label in IntensityLabel::ALL {
            let mean = set.mean(label);
            if !(mean >= 0.0) {
                return Err(ModelError::Domain {
                    name: "mean photon number",
                    value: mean,
                    domain: "[0, inf)",
                });
            }
            if mean > 0.0 {
                samplers[label.index()] =
                    Some(Poisson::new(mean).map_err(|e| ModelError::Parameter(e.to_string()))?);
            }
        }
        Ok(Self {
            set,
            wavelength_nm,
            samplers,
        })
    }

    pub fn intensities(&self) -> &IntensitySet {
        &self.set
    }

    pub fn emit<R: Rng + ?Sized>(
        &self,
        label: IntensityLabel,
        time_ns: f64,
        rng: &mut R,
    ) -> PhotonArrival {
        let n = match &self.samplers[label.index()] {
            Some(d) => d.sample(rng) as u32,
            None => 0,
        };
        let mut a = PhotonArrival::new(time_ns, n, self.wavelength_nm);
        a.intensity = Some(label);
        a
    }
}

/// Entangled-pair source with Poissonian pair number per pump window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSource {
    pub mean_pairs: f64,
    /// Two-photon interference visibility; a matched-basis pair disagrees with
    /// probability `(1 - V) / 2`.
    pub visibility: f64,
    pub wavelength_nm: f64,
}

impl PairSource {
    pub fn ideal(mean_pairs: f64) -> Self {
        Self {
            mean_pairs,
            visibility: 1.0,
            wavelength_nm: 1550.0,
        }
    }

    /// Tags of one pair, as seen by arm A and arm B. Arm B is anticorrelated.
    pub fn pair_tags<R: Rng + ?Sized>(&self, rng: &mut R) -> (PairTag, PairTag) {
        let flip_p = (1.0 - self.visibility) / 2.0;
        let word = rng.next_u64();
        let a = [(word & 1) as u8, ((word >> 1) & 1) as u8];
        let mut b = [1 - a[0], 1 - a[1]];
        for bit in &mut b {
            if rng.random::<f64>() < flip_p {
                *bit ^= 1;
            }
        }
        (PairTag { outcomes: a }, PairTag { outcomes: b })
    }

    /// One pump window. `None` when no pair was created.
    pub fn emit<R: Rng + ?Sized>(
        &self,
        time_ns: f64,
        rng: &mut R,
    ) -> Result<Option<(PhotonArrival, PhotonArrival)>, ModelError> {
        check_fraction("visibility", self.visibility)?;
        let n = sample_poisson(self.mean_pairs, rng)?;
        if n == 0 {
            return Ok(None);
        }
        let mut a = PhotonArrival::new(time_ns, n, self.wavelength_nm);
        let mut b = a.clone();
        for _ in 0..n {
            let (ta, tb) = self.pair_tags(rng);
            a.pairs.push(ta);
            b.pairs.push(tb);
        }
        a.multi_pair = n > 1;
        b.multi_pair = n > 1;
        Ok(Some((a, b)))
    }
}

/// Ideal-visibility pair emission at 1550 nm.
pub fn pair_emit<R: Rng + ?Sized>(
    mean_pairs: f64,
    window_time_ns: f64,
    rng: &mut R,
) -> Result<Option<(PhotonArrival, PhotonArrival)>, ModelError> {
    PairSource::ideal(mean_pairs).emit(window_time_ns, rng)
}
