//! The digital back-end: ADC quantization, parallel-lane (polyphase)
//! decomposition, per-channel calibration and weight-and-sum beamforming.
//!
//! Every operation here is sample-wise linear (except the quantizer), so
//! lane-wise processing and full-rate processing are the same arithmetic in
//! the same order — merge∘process_lanes equals process_fullrate bit for bit.
//! The shared accumulation in [`weight_and_sum`] is what guarantees it.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayGeometry, Pattern};
use crate::error::{Error, Result};
use crate::frontend::ChannelSet;
use crate::signal::{dbm_to_watts, IqStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdcConfig {
    pub sample_rate_hz: f64,
    pub resolution_bits: u32,
    /// Power of a sinusoid whose amplitude exactly spans the converter.
    pub full_scale_dbm: f64,
    /// Bypass quantization and clipping entirely.
    pub ideal: bool,
    /// Parallel output words per clock; the capture splits into this many
    /// polyphase lanes downstream.
    pub lanes: usize,
}

impl Default for AdcConfig {
    fn default() -> Self {
        AdcConfig {
            sample_rate_hz: 1966.08e6,
            resolution_bits: 12,
            full_scale_dbm: 0.0,
            ideal: false,
            lanes: 8,
        }
    }
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(4..=16).contains(&self.resolution_bits) {
            return Err(Error::invalid(format!(
                "resolution {} bits outside the supported 4–16 range",
                self.resolution_bits
            )));
        }
        if !self.full_scale_dbm.is_finite() {
            return Err(Error::invalid("full scale must be finite"));
        }
        if self.lanes == 0 {
            return Err(Error::invalid("need at least one lane"));
        }
        let lane_rate = self.sample_rate_hz / self.lanes as f64;
        if lane_rate.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "sample rate {} Hz does not divide into {} integer-rate lanes",
                self.sample_rate_hz, self.lanes
            )));
        }
        Ok(())
    }

    pub fn lane_rate_hz(&self) -> f64 {
        self.sample_rate_hz / self.lanes as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdcReport {
    pub clipped_samples: usize,
}

/// Mid-tread uniform quantizer per axis with two's-complement code range
/// [−2^(b−1), 2^(b−1)−1]; samples beyond the range clip and are counted.
pub fn adc_sample(s: &IqStream, cfg: &AdcConfig) -> Result<(IqStream, AdcReport)> {
    cfg.validate()?;
    if s.sample_rate_hz != cfg.sample_rate_hz {
        return Err(Error::invalid(format!(
            "stream rate {} Hz does not match the converter rate {} Hz",
            s.sample_rate_hz, cfg.sample_rate_hz
        )));
    }
    if cfg.ideal {
        return Ok((s.clone(), AdcReport { clipped_samples: 0 }));
    }
    let amplitude_fs = dbm_to_watts(cfg.full_scale_dbm).sqrt();
    let step = 2.0 * amplitude_fs / (1u64 << cfg.resolution_bits) as f64;
    let min_code = -((1i64) << (cfg.resolution_bits - 1)) as f64;
    let max_code = ((1i64 << (cfg.resolution_bits - 1)) - 1) as f64;
    let mut clipped = 0usize;
    let quantize = |x: f64, hit: &mut bool| -> f64 {
        let code = (x / step).round();
        if code < min_code {
            *hit = true;
            min_code * step
        } else if code > max_code {
            *hit = true;
            max_code * step
        } else {
            code * step
        }
    };
    let samples: Vec<Complex64> = s
        .samples
        .iter()
        .map(|v| {
            let mut hit = false;
            let q = Complex64::new(quantize(v.re, &mut hit), quantize(v.im, &mut hit));
            if hit {
                clipped += 1;
            }
            q
        })
        .collect();
    Ok((
        IqStream::new(samples, s.sample_rate_hz, s.center_freq_hz)?,
        AdcReport { clipped_samples: clipped },
    ))
}

/// A capture split into `lanes` interleaved sub-streams: lane k holds the
/// samples with index ≡ k (mod lanes), each at 1/lanes of the capture rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyphaseFrame {
    pub lanes: Vec<Vec<Complex64>>,
    pub lane_rate_hz: f64,
    pub center_freq_hz: f64,
    /// Tail samples dropped to make the length a lane multiple.
    pub truncated_samples: usize,
}

impl PolyphaseFrame {
    pub fn n_lanes(&self) -> usize {
        self.lanes.len()
    }

    pub fn lane_len(&self) -> usize {
        self.lanes[0].len()
    }
}

pub fn polyphase_split(s: &IqStream, n_lanes: usize) -> Result<PolyphaseFrame> {
    if n_lanes == 0 {
        return Err(Error::invalid("need at least one lane"));
    }
    let keep = s.samples.len() - s.samples.len() % n_lanes;
    if keep == 0 {
        return Err(Error::invalid(format!(
            "{} samples cannot fill even one word across {n_lanes} lanes",
            s.samples.len()
        )));
    }
    let per_lane = keep / n_lanes;
    let mut lanes = vec![Vec::with_capacity(per_lane); n_lanes];
    for (i, v) in s.samples[..keep].iter().enumerate() {
        lanes[i % n_lanes].push(*v);
    }
    Ok(PolyphaseFrame {
        lanes,
        lane_rate_hz: s.sample_rate_hz / n_lanes as f64,
        center_freq_hz: s.center_freq_hz,
        truncated_samples: s.samples.len() % n_lanes,
    })
}

pub fn polyphase_merge(f: &PolyphaseFrame) -> Result<IqStream> {
    let n_lanes = f.lanes.len();
    if n_lanes == 0 {
        return Err(Error::invalid("frame has no lanes"));
    }
    let per_lane = f.lanes[0].len();
    if f.lanes.iter().any(|l| l.len() != per_lane) {
        return Err(Error::invalid("lanes have unequal lengths"));
    }
    let mut samples = Vec::with_capacity(per_lane * n_lanes);
    for i in 0..per_lane {
        for lane in &f.lanes {
            samples.push(lane[i]);
        }
    }
    IqStream::new(samples, f.lane_rate_hz * n_lanes as f64, f.center_freq_hz)
}

/// Per-channel complex correction. The reference channel's constant is
/// pinned to exactly 1+0j; all others rotate/scale onto it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub reference_index: usize,
    pub constants: Vec<CalConstant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalConstant {
    pub alpha: f64,
    pub beta: f64,
}

impl CalConstant {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.alpha, self.beta)
    }

    pub fn from_complex(c: Complex64) -> Self {
        CalConstant { alpha: c.re, beta: c.im }
    }
}

impl CalibrationSet {
    pub fn identity(n_channels: usize, reference_index: usize) -> Result<CalibrationSet> {
        if reference_index >= n_channels {
            return Err(Error::invalid("reference channel index out of range"));
        }
        Ok(CalibrationSet {
            reference_index,
            constants: vec![CalConstant { alpha: 1.0, beta: 0.0 }; n_channels],
        })
    }

    pub fn n_channels(&self) -> usize {
        self.constants.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference_index >= self.constants.len() {
            return Err(Error::invalid("reference channel index out of range"));
        }
        let r = self.constants[self.reference_index];
        if r.alpha != 1.0 || r.beta != 0.0 {
            return Err(Error::invalid("reference channel constant must be exactly 1+0j"));
        }
        if self.constants.iter().any(|c| !(c.alpha.is_finite() && c.beta.is_finite())) {
            return Err(Error::invalid("calibration constants must be finite"));
        }
        Ok(())
    }
}

/// Least-squares single-constant estimate against the reference channel:
/// c_i = ⟨ch_i, ref⟩ / ⟨ch_i, ch_i⟩, so c_i·ch_i best approximates ref.
/// A channel with no energy makes the fit singular and is rejected.
pub fn estimate_calibration(channels: &ChannelSet, reference: usize) -> Result<CalibrationSet> {
    if reference >= channels.n_channels() {
        return Err(Error::invalid("reference channel index out of range"));
    }
    let ref_samples = &channels.streams[reference].samples;
    let mut constants = Vec::with_capacity(channels.n_channels());
    for (i, ch) in channels.streams.iter().enumerate() {
        if i == reference {
            constants.push(CalConstant { alpha: 1.0, beta: 0.0 });
        } else {
            let c = crate::signal::projection_coefficient(&ch.samples, ref_samples)
                .map_err(|e| Error::Computation(format!("channel {i}: {e}")))?;
            constants.push(CalConstant::from_complex(c));
        }
    }
    Ok(CalibrationSet { reference_index: reference, constants })
}

pub fn apply_calibration_streams(
    channels: &ChannelSet,
    cal: &CalibrationSet,
) -> Result<ChannelSet> {
    cal.validate()?;
    if cal.n_channels() != channels.n_channels() {
        return Err(Error::invalid(format!(
            "{} constants for {} channels",
            cal.n_channels(),
            channels.n_channels()
        )));
    }
    let streams = channels
        .streams
        .iter()
        .zip(&cal.constants)
        .map(|(s, c)| s.scaled(c.as_complex()))
        .collect();
    ChannelSet::new(streams)
}

/// Multiplies every lane of channel i by that channel's constant — the
/// lane-parallel form of [`apply_calibration_streams`].
pub fn apply_calibration_frames(
    frames: &[PolyphaseFrame],
    cal: &CalibrationSet,
) -> Result<Vec<PolyphaseFrame>> {
    cal.validate()?;
    if cal.n_channels() != frames.len() {
        return Err(Error::invalid(format!(
            "{} constants for {} channels",
            cal.n_channels(),
            frames.len()
        )));
    }
    Ok(frames
        .iter()
        .zip(&cal.constants)
        .map(|(f, c)| {
            let k = c.as_complex();
            PolyphaseFrame {
                lanes: f.lanes.iter().map(|lane| lane.iter().map(|x| k * x).collect()).collect(),
                ..f.clone()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamWeights {
    pub weights: Vec<Complex64>,
    pub target_angle_deg: f64,
}

impl BeamWeights {
    /// Conjugate-steering weights: unit magnitude, phases that cohere a
    /// wavefront from `target` at carrier `freq_hz`.
    pub fn steer(g: &ArrayGeometry, target_deg: f64, freq_hz: f64) -> Result<BeamWeights> {
        let v = crate::array::steering_vector(g, target_deg, freq_hz)?;
        Ok(BeamWeights {
            weights: v.iter().map(|x| x.conj()).collect(),
            target_angle_deg: target_deg,
        })
    }
}

/// Channel-ordered weighted accumulation. Both the full-rate and the
/// lane-wise beamformer funnel through this one loop, which fixes the
/// floating-point operation order and makes the two paths bit-identical.
fn weight_and_sum(channels: &[&[Complex64]], weights: &[Complex64]) -> Vec<Complex64> {
    let len = channels.first().map_or(0, |c| c.len());
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (w, ch) in weights.iter().zip(channels) {
        for (o, x) in out.iter_mut().zip(*ch) {
            *o += w * x;
        }
    }
    out
}

pub fn beamform_streams(channels: &ChannelSet, w: &BeamWeights) -> Result<IqStream> {
    if w.weights.len() != channels.n_channels() {
        return Err(Error::invalid(format!(
            "{} weights for {} channels",
            w.weights.len(),
            channels.n_channels()
        )));
    }
    let views: Vec<&[Complex64]> = channels.streams.iter().map(|s| s.samples.as_slice()).collect();
    let first = &channels.streams[0];
    IqStream::new(weight_and_sum(&views, &w.weights), first.sample_rate_hz, first.center_freq_hz)
}

/// Lane l of the output = Σ_i w_i · channel_i lane l, sample-wise.
pub fn beamform_frames(frames: &[PolyphaseFrame], w: &BeamWeights) -> Result<PolyphaseFrame> {
    if frames.is_empty() {
        return Err(Error::invalid("beamformer needs at least one channel"));
    }
    if w.weights.len() != frames.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} channels",
            w.weights.len(),
            frames.len()
        )));
    }
    let shape = (frames[0].n_lanes(), frames[0].lane_len());
    for (i, f) in frames.iter().enumerate() {
        if (f.n_lanes(), f.lane_len()) != shape
            || f.lane_rate_hz != frames[0].lane_rate_hz
            || f.lanes.iter().any(|l| l.len() != shape.1)
        {
            return Err(Error::invalid(format!("channel {i} frame shape differs")));
        }
    }
    let lanes = (0..shape.0)
        .map(|l| {
            let views: Vec<&[Complex64]> = frames.iter().map(|f| f.lanes[l].as_slice()).collect();
            weight_and_sum(&views, &w.weights)
        })
        .collect();
    Ok(PolyphaseFrame {
        lanes,
        lane_rate_hz: frames[0].lane_rate_hz,
        center_freq_hz: frames[0].center_freq_hz,
        truncated_samples: 0,
    })
}

/// Emulates a rotating-source measurement: for each direction of arrival the
/// scene regenerates the incident channels, the capture path (optional ADC,
/// optional calibration) runs, and the beamformed energy is recorded with
/// the weights held fixed. The result is peak-normalized like any pattern.
///
/// Angles are processed in parallel; ordering of the output is the grid's.
pub fn beam_energy_sweep<F>(
    source: F,
    weights: &BeamWeights,
    grid_deg: &[f64],
    adc: Option<&AdcConfig>,
    cal: Option<&CalibrationSet>,
) -> Result<Pattern>
where
    F: Fn(f64) -> Result<ChannelSet> + Sync,
{
    if grid_deg.len() < 2 {
        return Err(Error::invalid("sweep grid needs at least two points"));
    }
    let energies: Vec<f64> = grid_deg
        .par_iter()
        .map(|&doa| -> Result<f64> {
            let mut channels = source(doa)?;
            if let Some(adc) = adc {
                let streams = channels
                    .streams
                    .iter()
                    .map(|s| adc_sample(s, adc).map(|(q, _)| q))
                    .collect::<Result<Vec<_>>>()?;
                channels = ChannelSet::new(streams)?;
            }
            if let Some(cal) = cal {
                channels = apply_calibration_streams(&channels, cal)?;
            }
            let beam = beamform_streams(&channels, weights)?;
            Ok(beam.power_watts())
        })
        .collect::<Result<Vec<_>>>()?;
    Pattern::from_power(grid_deg.to_vec(), energies)
}
