//! Behavioral per-channel receiver chain: gain/noise/nonlinearity stages,
//! low-side IQ downconversion and channel mismatch injection.
//!
//! Signals are complex envelopes, so downconversion is carrier bookkeeping;
//! each stage then amplifies, adds its own thermal noise and applies a
//! memoryless cubic compression sized from its output intercept point.
//! Stage noise powers are chosen so the cascade reproduces the Friis noise
//! figure exactly: source noise kTB enters once at the input, and stage k
//! adds kTB·(F_k−1)·G_k at its own output.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::budget::{ChainSpec, ResolvedStage};
use crate::error::{Error, Result};
use crate::signal::{dbm_to_watts, IqStream, BOLTZMANN_J_PER_K, NOISE_REF_TEMPERATURE_K};

/// Per-channel complex gain error relative to the reference channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MismatchSpec {
    pub gain_err_db: f64,
    pub phase_err_deg: f64,
}

impl MismatchSpec {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::from_polar(10f64.powf(self.gain_err_db / 20.0), self.phase_err_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontendConfig {
    pub chain: ChainSpec,
    pub lo_freq_hz: f64,
    pub rf_center_hz: f64,
    /// One entry per channel; empty means every channel is ideal.
    pub mismatch: Vec<MismatchSpec>,
    pub include_balun: bool,
    pub noise_enabled: bool,
    /// Bandwidth the injected noise powers are sized for. `None` sizes them
    /// to the sample rate, which keeps the noise *density* physical; a fixed
    /// value reproduces a stated total power regardless of sample rate.
    pub noise_bandwidth_hz: Option<f64>,
    pub noise_seed: u64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            chain: ChainSpec::default(),
            lo_freq_hz: 27.9e9,
            rf_center_hz: 28.2e9,
            mismatch: Vec::new(),
            include_balun: false,
            noise_enabled: true,
            noise_bandwidth_hz: None,
            noise_seed: 1,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        if !(self.lo_freq_hz > 0.0 && self.lo_freq_hz.is_finite()) {
            return Err(Error::invalid("LO frequency must be positive"));
        }
        if self.lo_freq_hz >= self.rf_center_hz {
            return Err(Error::invalid(format!(
                "low-side LO required: LO {} Hz is not below the carrier {} Hz",
                self.lo_freq_hz, self.rf_center_hz
            )));
        }
        let if_hz = self.rf_center_hz - self.lo_freq_hz;
        let (lo_band, hi_band) = self.chain.if_band_hz;
        if !(lo_band..=hi_band).contains(&if_hz) {
            return Err(Error::invalid(format!(
                "IF {} Hz falls outside the chain's [{lo_band}, {hi_band}] Hz design band",
                if_hz
            )));
        }
        if let Some(b) = self.noise_bandwidth_hz {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid("noise bandwidth must be positive"));
            }
        }
        for (i, m) in self.mismatch.iter().enumerate() {
            if !(m.gain_err_db.is_finite() && m.phase_err_deg.is_finite()) {
                return Err(Error::invalid(format!("channel {i} mismatch is not finite")));
            }
        }
        Ok(())
    }

    pub fn if_center_hz(&self) -> f64 {
        self.rf_center_hz - self.lo_freq_hz
    }

    /// The chain actually simulated, including the optional output balun.
    pub fn effective_chain(&self) -> ChainSpec {
        if self.include_balun {
            self.chain.with_balun()
        } else {
            self.chain.clone()
        }
    }
}

/// Streams from all channels of one capture: equal length, rate and carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub streams: Vec<IqStream>,
}

impl ChannelSet {
    pub fn new(streams: Vec<IqStream>) -> Result<ChannelSet> {
        if streams.is_empty() {
            return Err(Error::invalid("channel set needs at least one stream"));
        }
        let (len, rate, center) =
            (streams[0].samples.len(), streams[0].sample_rate_hz, streams[0].center_freq_hz);
        for (i, s) in streams.iter().enumerate() {
            if s.samples.len() != len || s.sample_rate_hz != rate || s.center_freq_hz != center {
                return Err(Error::invalid(format!(
                    "channel {i} disagrees with channel 0 in length, rate or carrier"
                )));
            }
        }
        Ok(ChannelSet { streams })
    }

    pub fn n_channels(&self) -> usize {
        self.streams.len()
    }

    pub fn len(&self) -> usize {
        self.streams[0].samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams[0].samples.is_empty()
    }
}

/// Independent, reproducible per-channel noise generator: the channel index
/// is mixed into the seed with a splitmix64 round so channel streams never
/// overlap even for adjacent seeds.
pub fn channel_rng(seed: u64, channel: usize) -> ChaCha8Rng {
    let mut z = seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(channel as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

fn add_noise(samples: &mut [Complex64], power_w: f64, rng: &mut ChaCha8Rng) {
    if power_w <= 0.0 {
        return;
    }
    let sigma_axis = (power_w / 2.0).sqrt();
    for s in samples.iter_mut() {
        let ni: f64 = rng.sample(StandardNormal);
        let nq: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(ni * sigma_axis, nq * sigma_axis);
    }
}

/// One gain/noise/compression stage.
///
/// Output = gain·input, plus white Gaussian noise of power kTB·(F−1)·G when
/// a generator is supplied, then `z = y·(1 − |y|²/P_oip3)` when the stage has
/// an intercept point — the memoryless cubic whose two-tone products obey
/// P_IM3 = 3·P_out − 2·OIP3.
pub fn apply_stage(
    s: &IqStream,
    stage: &ResolvedStage,
    noise_bandwidth_hz: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<IqStream> {
    if !(noise_bandwidth_hz > 0.0 && noise_bandwidth_hz.is_finite()) {
        return Err(Error::invalid("noise bandwidth must be positive"));
    }
    let a1 = 10f64.powf(stage.gain_db / 20.0);
    let mut samples: Vec<Complex64> = s.samples.iter().map(|x| a1 * x).collect();
    if let Some(rng) = rng {
        let g = 10f64.powf(stage.gain_db / 10.0);
        let f = 10f64.powf(stage.nf_db / 10.0);
        let ktb = BOLTZMANN_J_PER_K * NOISE_REF_TEMPERATURE_K * noise_bandwidth_hz;
        add_noise(&mut samples, ktb * (f - 1.0) * g, rng);
    }
    if let Some(oip3_dbm) = stage.oip3_dbm {
        let w = dbm_to_watts(oip3_dbm);
        for y in samples.iter_mut() {
            *y *= 1.0 - y.norm_sqr() / w;
        }
    }
    IqStream::new(samples, s.sample_rate_hz, s.center_freq_hz)
}

/// Low-side quadrature downconversion. On a complex envelope this only moves
/// the carrier label: content is untouched. The resulting IF must land inside
/// `if_band_hz` (inclusive).
pub fn iq_downconvert(s: &IqStream, lo_freq_hz: f64, if_band_hz: (f64, f64)) -> Result<IqStream> {
    if !(lo_freq_hz > 0.0 && lo_freq_hz.is_finite()) {
        return Err(Error::invalid("LO frequency must be positive"));
    }
    if lo_freq_hz >= s.center_freq_hz {
        return Err(Error::invalid(format!(
            "low-side LO required: {lo_freq_hz} Hz is not below the {} Hz carrier",
            s.center_freq_hz
        )));
    }
    let if_hz = s.center_freq_hz - lo_freq_hz;
    if !(if_band_hz.0..=if_band_hz.1).contains(&if_hz) {
        return Err(Error::invalid(format!(
            "IF {if_hz} Hz falls outside the [{}, {}] Hz design band",
            if_band_hz.0, if_band_hz.1
        )));
    }
    IqStream::new(s.samples.clone(), s.sample_rate_hz, if_hz)
}

pub fn apply_mismatch(s: &IqStream, m: &MismatchSpec) -> Result<IqStream> {
    if !(m.gain_err_db.is_finite() && m.phase_err_deg.is_finite()) {
        return Err(Error::invalid("mismatch must be finite"));
    }
    Ok(s.scaled(m.as_complex()))
}

/// Runs every element's RF input through the full receive chain, producing
/// the IF streams the digital back-end ingests.
///
/// Per channel: downconvert, add source noise kTB, then the chain's stages
/// (gain slopes resolved at the actual IF), then that channel's mismatch.
/// Noise draws come from a per-channel generator seeded by
/// (noise_seed, channel), so output is deterministic and channels stay
/// independent.
pub fn simulate_frontend(inputs: &ChannelSet, cfg: &FrontendConfig) -> Result<ChannelSet> {
    cfg.validate()?;
    let n = inputs.n_channels();
    if !(1..=32).contains(&n) {
        return Err(Error::invalid(format!("supported channel counts are 1–32, got {n}")));
    }
    if !cfg.mismatch.is_empty() && cfg.mismatch.len() != n {
        return Err(Error::invalid(format!(
            "{} mismatch entries for {n} channels",
            cfg.mismatch.len()
        )));
    }
    let chain = cfg.effective_chain();
    let mut out = Vec::with_capacity(n);
    for (ch, input) in inputs.streams.iter().enumerate() {
        let mut s = iq_downconvert(input, cfg.lo_freq_hz, chain.if_band_hz)?;
        let bandwidth = cfg.noise_bandwidth_hz.unwrap_or(s.sample_rate_hz);
        let stages = chain.resolve(s.center_freq_hz)?;
        let mut rng = cfg.noise_enabled.then(|| channel_rng(cfg.noise_seed, ch));
        if let Some(rng) = rng.as_mut() {
            let ktb = BOLTZMANN_J_PER_K * NOISE_REF_TEMPERATURE_K * bandwidth;
            let mut samples = s.samples;
            add_noise(&mut samples, ktb, rng);
            s = IqStream::new(samples, s.sample_rate_hz, s.center_freq_hz)?;
        }
        for stage in &stages {
            s = apply_stage(&s, stage, bandwidth, rng.as_mut())?;
        }
        if let Some(m) = cfg.mismatch.get(ch) {
            s = apply_mismatch(&s, m)?;
        }
        out.push(s);
    }
    ChannelSet::new(out)
}
