//! Closed-form link models and asymptotic key-rate estimates.

use serde::{Deserialize, Serialize};

use crate::error::{check_fraction, ModelError};

/// Shannon entropy of a biased coin, in bits.
pub fn binary_entropy(p: f64) -> Result<f64, ModelError> {
    check_fraction("p", p)?;
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Expected gain and error rate of a weak coherent pulse of mean `intensity`.
///
/// `Q = Y0 + 1 - exp(-eta * intensity)` and
/// `E * Q = e0 * Y0 + e_det * (1 - exp(-eta * intensity))`. When `Q` is zero
/// the error rate is reported as `e0`.
pub fn analytic_gain(
    intensity: f64,
    eta_total: f64,
    y0: f64,
    e_det: f64,
    e0: f64,
) -> Result<(f64, f64), ModelError> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(ModelError::Domain {
            name: "intensity",
            value: intensity,
            domain: "[0, inf)",
        });
    }
    check_fraction("eta_total", eta_total)?;
    check_fraction("y0", y0)?;
    check_fraction("e0", e0)?;
    if !(0.0..=0.5).contains(&e_det) {
        return Err(ModelError::Domain {
            name: "e_det",
            value: e_det,
            domain: "[0, 0.5]",
        });
    }
    let signal = -(-eta_total * intensity).exp_m1();
    let q = (y0 + signal).min(1.0);
    if q == 0.0 {
        return Ok((0.0, e0));
    }
    Ok((q, (e0 * y0 + e_det * signal) / q))
}

/// Measured gains and error rates of the three intensity classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyInputs {
    pub q_signal: f64,
    pub e_signal: f64,
    pub q_decoy: f64,
    pub e_decoy: f64,
    pub q_vacuum: f64,
    pub e_vacuum: f64,
}

/// Single-photon bounds derived from the vacuum + weak decoy method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y0: f64,
    pub y1_lower: f64,
    pub e1_upper: f64,
    /// `Y1_lower * mu * exp(-mu)`.
    pub q1_lower: f64,
    /// Set when a bound had to be clamped, i.e. no single-photon security
    /// can be certified from these statistics.
    pub insecure: bool,
}

/// Lower bound on the single-photon yield and upper bound on its error rate.
pub fn decoy_bounds(
    inputs: &DecoyInputs,
    mu: f64,
    nu: f64,
    e0: f64,
) -> Result<DecoyBounds, ModelError> {
    if !(mu > nu && nu > 0.0) {
        return Err(ModelError::Parameter(format!(
            "decoy bounds need mu > nu > 0, got mu = {mu}, nu = {nu}"
        )));
    }
    for (name, v) in [
        ("q_signal", inputs.q_signal),
        ("e_signal", inputs.e_signal),
        ("q_decoy", inputs.q_decoy),
        ("e_decoy", inputs.e_decoy),
        ("q_vacuum", inputs.q_vacuum),
        ("e_vacuum", inputs.e_vacuum),
    ] {
        check_fraction(name, v)?;
    }
    let y0 = inputs.q_vacuum;
    let mut y1 = mu / (mu * nu - nu * nu)
        * (inputs.q_decoy * nu.exp()
            - inputs.q_signal * mu.exp() * (nu * nu) / (mu * mu)
            - (mu * mu - nu * nu) / (mu * mu) * y0);
    let mut insecure = false;
    if !(y1 > 0.0) {
        return Ok(DecoyBounds {
            y0,
            y1_lower: 0.0,
            e1_upper: 0.5,
            q1_lower: 0.0,
            insecure: true,
        });
    }
    if y1 > 1.0 {
        y1 = 1.0;
        insecure = true;
    }
    let mut e1 = (inputs.e_decoy * inputs.q_decoy * nu.exp() - e0 * y0) / (y1 * nu);
    if e1 < 0.0 {
        e1 = 0.0;
    }
    if e1 > 0.5 {
        insecure = true;
    }
    e1 = e1.min(1.0);
    Ok(DecoyBounds {
        y0,
        y1_lower: y1,
        e1_upper: e1,
        q1_lower: y1 * mu * (-mu).exp(),
        insecure,
    })
}

/// An asymptotic key rate, floored at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    /// Secret bits per pulse (or per pump window).
    pub rate: f64,
    /// Value before flooring; negative means no key.
    pub unfloored: f64,
    pub insecure: bool,
}

impl KeyRate {
    fn floored(raw: f64) -> Self {
        Self {
            rate: raw.max(0.0),
            unfloored: raw,
            insecure: !(raw > 0.0),
        }
    }
}

fn check_f_ec(f_ec: f64) -> Result<(), ModelError> {
    if f_ec >= 1.0 {
        Ok(())
    } else {
        Err(ModelError::Domain {
            name: "f_ec",
            value: f_ec,
            domain: "[1, inf)",
        })
    }
}

/// Decoy-state BB84 rate per signal pulse:
/// `q * (Q1 * (1 - H(e1)) - Q_mu * f * H(E_mu))`.
pub fn secure_key_rate(
    q_mu: f64,
    e_mu: f64,
    q1_lower: f64,
    e1_upper: f64,
    f_ec: f64,
    basis_factor: f64,
) -> Result<KeyRate, ModelError> {
    check_fraction("q_mu", q_mu)?;
    check_fraction("q1_lower", q1_lower)?;
    check_fraction("basis_factor", basis_factor)?;
    check_f_ec(f_ec)?;
    let h1 = binary_entropy(e1_upper.min(0.5))?;
    let raw = basis_factor * (q1_lower * (1.0 - h1) - q_mu * f_ec * binary_entropy(e_mu)?);
    Ok(KeyRate::floored(raw))
}

/// Entanglement-based rate per pump window: `q * Q_c * (1 - (1 + f) * H(E))`.
pub fn bbm92_key_rate(
    q_coincidence: f64,
    qber: f64,
    f_ec: f64,
    basis_factor: f64,
) -> Result<KeyRate, ModelError> {
    check_fraction("q_coincidence", q_coincidence)?;
    check_fraction("basis_factor", basis_factor)?;
    check_f_ec(f_ec)?;
    let raw = basis_factor * q_coincidence * (1.0 - (1.0 + f_ec) * binary_entropy(qber)?);
    Ok(KeyRate::floored(raw))
}

/// Per-window coincidence probabilities of a pair link and the error each
/// class contributes to the sifted key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLinkModel {
    /// Both photons of one pair detected.
    pub true_coincidence: f64,
    /// Photons of different pairs of one window detected.
    pub multi_pair_coincidence: f64,
    /// At least one side is a dark count.
    pub accidental_coincidence: f64,
    /// Fraction of true coincidences inside the window under Gaussian jitter.
    pub window_capture: f64,
    pub total: f64,
    pub qber: f64,
    pub error_budget: ErrorBudget,
}

/// Contribution of each error source to the QBER; the parts sum to the QBER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub visibility: f64,
    pub multi_pair: f64,
    pub accidental: f64,
}

/// Inputs of [`pair_link_model`]. Efficiencies include the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLinkParams {
    pub mean_pairs: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub visibility: f64,
    /// Total dark rate of each receiver, c/s.
    pub dark_a_cps: f64,
    pub dark_b_cps: f64,
    pub window_ns: f64,
    pub pump_rate_hz: f64,
    /// Standard deviation of one detector's timing jitter.
    pub jitter_sigma_ns: f64,
}

/// Closed-form coincidence model of a Poissonian pair link.
pub fn pair_link_model(p: &PairLinkParams) -> Result<PairLinkModel, ModelError> {
    check_fraction("eta_a", p.eta_a)?;
    check_fraction("eta_b", p.eta_b)?;
    check_fraction("visibility", p.visibility)?;
    if !(p.mean_pairs >= 0.0 && p.pump_rate_hz > 0.0 && p.window_ns >= 0.0) {
        return Err(ModelError::Parameter(
            "pair link needs mean_pairs >= 0, pump_rate_hz > 0, window_ns >= 0".into(),
        ));
    }
    let mu = p.mean_pairs;
    let pa = -(-mu * p.eta_a).exp_m1();
    let pb = -(-mu * p.eta_b).exp_m1();
    let correlated = (-mu * (p.eta_a + p.eta_b)).exp() * (mu * p.eta_a * p.eta_b).exp_m1();
    let capture = if p.jitter_sigma_ns > 0.0 {
        libm::erf(p.window_ns / (2.0 * p.jitter_sigma_ns))
    } else {
        1.0
    };
    let f = p.pump_rate_hz;
    let w = p.window_ns * 1e-9;
    let accidental =
        2.0 * w * (p.dark_a_cps * pb * f + p.dark_b_cps * pa * f + p.dark_a_cps * p.dark_b_cps) / f;
    let c_true = correlated * capture;
    let c_multi = pa * pb * capture;
    let total = c_true + c_multi + accidental;
    let budget = if total > 0.0 {
        ErrorBudget {
            visibility: c_true * (1.0 - p.visibility) / 2.0 / total,
            multi_pair: 0.5 * c_multi / total,
            accidental: 0.5 * accidental / total,
        }
    } else {
        ErrorBudget {
            visibility: 0.0,
            multi_pair: 0.0,
            accidental: 0.0,
        }
    };
    Ok(PairLinkModel {
        true_coincidence: c_true,
        multi_pair_coincidence: c_multi,
        accidental_coincidence: accidental,
        window_capture: capture,
        total,
        qber: budget.visibility + budget.multi_pair + budget.accidental,
        error_budget: budget,
    })
}
