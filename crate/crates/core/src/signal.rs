//! Complex-envelope signals and power bookkeeping.
//!
//! All signals are equivalent low-pass (complex envelope) sample streams with
//! a 1 Ω power normalization: `|sample|^2` is instantaneous power in watts,
//! so a tone of power P dBm has constant magnitude `sqrt(dbm_to_watts(P))`.
//! Thermal noise references 290 K.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;
pub const NOISE_REF_TEMPERATURE_K: f64 = 290.0;

/// Conventional 290 K noise floor figure used in budget arithmetic
/// (10·log10(kT) + 30 rounds to −173.98 dBm/Hz).
pub const NOISE_FLOOR_DBM_PER_HZ: f64 = -173.98;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Zero and negative powers map to −∞ ("below floor").
pub fn watts_to_dbm(watts: f64) -> f64 {
    if watts <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * watts.log10() + 30.0
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * x.log10()
    }
}

/// Renders a power level, using "below floor" for the −∞ sentinel.
pub fn format_power_dbm(dbm: f64) -> String {
    if dbm == f64::NEG_INFINITY {
        "below floor".to_string()
    } else {
        format!("{dbm:.2} dBm")
    }
}

/// A complex-envelope sample stream.
///
/// `center_freq_hz` records the absolute RF/IF frequency the envelope is
/// referenced to; frequency translation is bookkeeping on this field and
/// leaves the samples untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqStream {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub center_freq_hz: f64,
}

impl IqStream {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64, center_freq_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if !center_freq_hz.is_finite() || center_freq_hz < 0.0 {
            return Err(Error::invalid(format!(
                "center frequency must be finite and non-negative, got {center_freq_hz}"
            )));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        Ok(IqStream { samples, sample_rate_hz, center_freq_hz })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean |s|^2 in watts. Zero for an empty stream.
    pub fn power_watts(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.samples.iter().map(|s| s.norm_sqr()).sum();
        sum / self.samples.len() as f64
    }

    /// Same stream with every sample multiplied by a complex constant.
    pub fn scaled(&self, c: Complex64) -> IqStream {
        IqStream {
            samples: self.samples.iter().map(|s| s * c).collect(),
            sample_rate_hz: self.sample_rate_hz,
            center_freq_hz: self.center_freq_hz,
        }
    }
}

/// Complex tone at `freq_offset_hz` from the envelope reference.
///
/// The offset must be strictly inside the Nyquist band (|f| < fs/2).
pub fn make_tone(
    freq_offset_hz: f64,
    sample_rate_hz: f64,
    power_dbm: f64,
    phase_rad: f64,
    n_samples: usize,
) -> Result<IqStream> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if freq_offset_hz.abs() >= sample_rate_hz / 2.0 {
        return Err(Error::invalid(format!(
            "tone offset {freq_offset_hz} Hz aliases at sample rate {sample_rate_hz} Hz"
        )));
    }
    let amplitude = dbm_to_watts(power_dbm).sqrt();
    let w = 2.0 * std::f64::consts::PI * freq_offset_hz / sample_rate_hz;
    let samples = (0..n_samples)
        .map(|k| Complex64::from_polar(amplitude, w * k as f64 + phase_rad))
        .collect();
    IqStream::new(samples, sample_rate_hz, 0.0)
}

/// kTB in dBm.
pub fn thermal_noise_power_dbm(bandwidth_hz: f64, temperature_k: f64) -> Result<f64> {
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    if !(temperature_k.is_finite() && temperature_k > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    Ok(watts_to_dbm(BOLTZMANN_J_PER_K * temperature_k * bandwidth_hz))
}

/// Mean power of a stream in dBm. Empty streams are rejected; an all-zero
/// stream reports the −∞ sentinel (see [`format_power_dbm`]).
pub fn measure_power_dbm(s: &IqStream) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::Computation("cannot measure power of an empty stream".into()));
    }
    Ok(watts_to_dbm(s.power_watts()))
}

/// Least-squares complex scale c minimizing ‖target − c·reference‖²:
/// c = ⟨reference, target⟩ / ⟨reference, reference⟩. Rejects a reference with
/// (near-)zero energy, where the fit is singular.
pub fn projection_coefficient(reference: &[Complex64], target: &[Complex64]) -> Result<Complex64> {
    if reference.len() != target.len() || reference.is_empty() {
        return Err(Error::invalid("projection needs equal-length, non-empty sequences"));
    }
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0f64;
    for (r, t) in reference.iter().zip(target) {
        num += r.conj() * t;
        den += r.norm_sqr();
    }
    let mean_energy = den / reference.len() as f64;
    if mean_energy.is_nan() || mean_energy <= 1e-300 {
        return Err(Error::Computation("projection reference has no energy".into()));
    }
    Ok(num / den)
}
