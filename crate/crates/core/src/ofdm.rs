//! Square-QAM mapping and the OFDM waveform: Gray-coded constellations,
//! cyclic-prefixed multicarrier modulation, additive channel noise and
//! Monte-Carlo bit-error measurement.
//!
//! Transforms use the unitary convention (1/√N each way) so Parseval holds
//! without bookkeeping: a unit-power constellation on `n_data` of `n_fft`
//! bins yields a time-domain waveform of power `n_data / n_fft`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::budget::OfdmParams;
use crate::error::{Error, Result};

/// Hard cap on constellation points retained in a [`BerResult`], so long
/// runs don't hold every received symbol in memory.
pub const MAX_STORED_SYMBOLS: usize = 65_536;

fn bits_per_axis(m: usize) -> Result<u32> {
    if !m.is_power_of_two() || m < 4 {
        return Err(Error::invalid(format!("QAM order {m} is not a square power of two")));
    }
    let b = m.trailing_zeros();
    if !b.is_multiple_of(2) || b > 10 {
        return Err(Error::invalid(format!("QAM order {m} is not a supported square size")));
    }
    Ok(b / 2)
}

/// Half the spacing between adjacent levels on one axis, chosen so the full
/// constellation has unit mean power: d = √(3 / (2(M−1))).
pub fn qam_normalization(m: usize) -> Result<f64> {
    bits_per_axis(m)?;
    Ok(1.0 / (2.0 * (m as f64 - 1.0) / 3.0).sqrt())
}

pub fn gray_encode(k: u32) -> u32 {
    k ^ (k >> 1)
}

pub fn gray_decode(g: u32) -> u32 {
    let mut k = g;
    let mut shift = 1;
    while (g >> shift) != 0 {
        k ^= g >> shift;
        shift += 1;
    }
    k
}

/// One axis: the bit group (MSB first) Gray-decodes to a level index k, and
/// level k sits at (L−1−2k)·d, descending from +(L−1)d. Neighbouring levels
/// therefore differ in exactly one bit.
fn axis_value(bits: &[u8], levels: u32, d: f64) -> f64 {
    let mut g = 0u32;
    for &b in bits {
        g = (g << 1) | b as u32;
    }
    let k = gray_decode(g);
    (levels as f64 - 1.0 - 2.0 * k as f64) * d
}

fn axis_bits(value: f64, levels: u32, d: f64, out: &mut Vec<u8>, width: u32) {
    let raw = ((levels as f64 - 1.0 - value / d) / 2.0).round();
    let k = raw.clamp(0.0, levels as f64 - 1.0) as u32;
    let g = gray_encode(k);
    for i in (0..width).rev() {
        out.push(((g >> i) & 1) as u8);
    }
}

/// Maps a bit stream (values 0/1) onto unit-mean-power Gray-coded square
/// QAM. The first half of each symbol's bits selects I, the second half Q.
pub fn qam_map(bits: &[u8], m: usize) -> Result<Vec<Complex64>> {
    let half = bits_per_axis(m)?;
    let bps = (2 * half) as usize;
    if bits.is_empty() || !bits.len().is_multiple_of(bps) {
        return Err(Error::invalid(format!(
            "bit count {} is not a positive multiple of {bps}",
            bits.len()
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::invalid("bits must be 0 or 1"));
    }
    let d = qam_normalization(m)?;
    let levels = 1u32 << half;
    Ok(bits
        .chunks_exact(bps)
        .map(|chunk| {
            let i = axis_value(&chunk[..half as usize], levels, d);
            let q = axis_value(&chunk[half as usize..], levels, d);
            Complex64::new(i, q)
        })
        .collect())
}

/// Hard-decision demapper: nearest level per axis, clipped at the outermost
/// levels, then Gray re-encoded.
pub fn qam_demap(symbols: &[Complex64], m: usize) -> Result<Vec<u8>> {
    let half = bits_per_axis(m)?;
    let d = qam_normalization(m)?;
    let levels = 1u32 << half;
    let mut out = Vec::with_capacity(symbols.len() * 2 * half as usize);
    for s in symbols {
        axis_bits(s.re, levels, d, &mut out, half);
        axis_bits(s.im, levels, d, &mut out, half);
    }
    Ok(out)
}

/// Every constellation point in bit-pattern order (index = bits MSB-first).
pub fn qam_constellation(m: usize) -> Result<Vec<Complex64>> {
    let half = bits_per_axis(m)?;
    let bps = 2 * half as usize;
    let mut bits = Vec::with_capacity(m * bps);
    for idx in 0..m as u32 {
        for i in (0..bps).rev() {
            bits.push(((idx >> i) & 1) as u8);
        }
    }
    qam_map(&bits, m)
}

/// Data-bearing subcarrier indices in ascending order: the DC bin stays
/// empty, negative and positive half-bands carry ⌊n/2⌋ and ⌈n/2⌉ carriers.
pub fn active_bins(n_fft: usize, n_data: usize) -> Result<Vec<i32>> {
    if n_data == 0 || n_data >= n_fft {
        return Err(Error::invalid(format!(
            "cannot place {n_data} data carriers in a {n_fft}-point transform"
        )));
    }
    let neg = (n_data / 2) as i32;
    let pos = (n_data - n_data / 2) as i32;
    let mut bins: Vec<i32> = (-neg..=-1).collect();
    bins.extend(1..=pos);
    Ok(bins)
}

fn bin_to_index(bin: i32, n_fft: usize) -> usize {
    bin.rem_euclid(n_fft as i32) as usize
}

/// Modulates `symbols` (length a multiple of `n_data`) into a cyclic-prefixed
/// time-domain sample stream at the FFT rate `n_fft · subcarrier_spacing`.
pub fn ofdm_modulate(p: &OfdmParams, symbols: &[Complex64]) -> Result<Vec<Complex64>> {
    p.validate()?;
    if symbols.is_empty() || !symbols.len().is_multiple_of(p.n_data) {
        return Err(Error::invalid(format!(
            "symbol count {} is not a positive multiple of {}",
            symbols.len(),
            p.n_data
        )));
    }
    let bins = active_bins(p.n_fft, p.n_data)?;
    let cp = p.cyclic_prefix_len();
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(p.n_fft);
    let scale = 1.0 / (p.n_fft as f64).sqrt();
    let mut out = Vec::with_capacity(symbols.len() / p.n_data * (p.n_fft + cp));
    let mut spectrum = vec![Complex64::new(0.0, 0.0); p.n_fft];
    for frame in symbols.chunks_exact(p.n_data) {
        spectrum.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for (bin, sym) in bins.iter().zip(frame) {
            spectrum[bin_to_index(*bin, p.n_fft)] = *sym;
        }
        ifft.process(&mut spectrum);
        spectrum.iter_mut().for_each(|x| *x *= scale);
        out.extend_from_slice(&spectrum[p.n_fft - cp..]);
        out.extend_from_slice(&spectrum);
    }
    Ok(out)
}

/// Inverse of [`ofdm_modulate`]: strips each cyclic prefix and returns the
/// recovered data-carrier values, frame by frame.
pub fn ofdm_demodulate(p: &OfdmParams, samples: &[Complex64]) -> Result<Vec<Complex64>> {
    p.validate()?;
    let cp = p.cyclic_prefix_len();
    let frame_len = p.n_fft + cp;
    if samples.is_empty() || !samples.len().is_multiple_of(frame_len) {
        return Err(Error::invalid(format!(
            "sample count {} is not a positive multiple of the symbol length {frame_len}",
            samples.len()
        )));
    }
    let bins = active_bins(p.n_fft, p.n_data)?;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(p.n_fft);
    let scale = 1.0 / (p.n_fft as f64).sqrt();
    let mut out = Vec::with_capacity(samples.len() / frame_len * p.n_data);
    let mut buf = vec![Complex64::new(0.0, 0.0); p.n_fft];
    for frame in samples.chunks_exact(frame_len) {
        buf.copy_from_slice(&frame[cp..]);
        fft.process(&mut buf);
        for bin in &bins {
            out.push(buf[bin_to_index(*bin, p.n_fft)] * scale);
        }
    }
    Ok(out)
}

/// Adds circularly-symmetric Gaussian noise sized against the measured mean
/// power of `samples`. An infinite SNR (or an all-zero input) passes the
/// samples through untouched.
pub fn awgn_with(samples: &[Complex64], snr_db: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    if snr_db == f64::INFINITY || samples.is_empty() {
        return samples.to_vec();
    }
    let power = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
    if power <= 0.0 {
        return samples.to_vec();
    }
    let sigma_axis = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    samples
        .iter()
        .map(|s| {
            let ni: f64 = rng.sample(StandardNormal);
            let nq: f64 = rng.sample(StandardNormal);
            s + Complex64::new(ni * sigma_axis, nq * sigma_axis)
        })
        .collect()
}

pub fn awgn(samples: &[Complex64], snr_db: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    awgn_with(samples, snr_db, &mut rng)
}

/// Closed-form nearest-neighbour bit-error estimate for Gray-coded square
/// M-QAM at a given Eb/N0.
pub fn theoretical_qam_ber(m: usize, ebn0_db: f64) -> Result<f64> {
    let half = bits_per_axis(m)?;
    let bps = (2 * half) as f64;
    let eb = 10f64.powf(ebn0_db / 10.0);
    let arg = (3.0 * bps * eb / (m as f64 - 1.0)).sqrt();
    let q = 0.5 * libm::erfc(arg / std::f64::consts::SQRT_2);
    Ok((4.0 / bps) * (1.0 - 1.0 / (m as f64).sqrt()) * q)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerResult {
    pub ebn0_db: f64,
    pub n_bits: usize,
    pub bit_errors: usize,
    pub ber: f64,
    /// RMS error-vector magnitude of the equalization-free received
    /// constellation, as a fraction of the RMS reference amplitude.
    pub evm_rms: f64,
    /// Received constellation points, capped at [`MAX_STORED_SYMBOLS`].
    pub received: Vec<Complex64>,
}

/// Monte-Carlo bit-error run over an ideal AWGN channel.
///
/// The channel noise is sized so the demodulated per-carrier SNR equals
/// log2(M)·Eb/N0 — the detector-referenced operating point — which puts the
/// stream SNR at Eb/N0 + 10·log10(log2(M)·n_data/n_fft). `n_bits` is rounded
/// up to a whole number of OFDM frames.
pub fn ber_test(p: &OfdmParams, ebn0_db: f64, n_bits: usize, seed: u64) -> Result<BerResult> {
    p.validate()?;
    if n_bits == 0 {
        return Err(Error::invalid("bit-error run needs at least one bit"));
    }
    let bps = p.bits_per_symbol() as usize;
    let frame_bits = bps * p.n_data;
    let n_frames = n_bits.div_ceil(frame_bits);
    let total_bits = n_frames * frame_bits;

    let stream_snr_db = if ebn0_db == f64::INFINITY {
        f64::INFINITY
    } else {
        ebn0_db + 10.0 * ((bps * p.n_data) as f64 / p.n_fft as f64).log10()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bit_errors = 0usize;
    let mut err_energy = 0.0f64;
    let mut ref_energy = 0.0f64;
    let mut received = Vec::new();
    let mut tx_bits = vec![0u8; frame_bits];
    for _ in 0..n_frames {
        for b in tx_bits.iter_mut() {
            *b = rng.random::<bool>() as u8;
        }
        let tx_syms = qam_map(&tx_bits, p.modulation_order)?;
        let tx = ofdm_modulate(p, &tx_syms)?;
        let rx = awgn_with(&tx, stream_snr_db, &mut rng);
        let rx_syms = ofdm_demodulate(p, &rx)?;
        let rx_bits = qam_demap(&rx_syms, p.modulation_order)?;
        bit_errors += tx_bits.iter().zip(&rx_bits).filter(|(a, b)| a != b).count();
        for (t, r) in tx_syms.iter().zip(&rx_syms) {
            err_energy += (r - t).norm_sqr();
            ref_energy += t.norm_sqr();
        }
        if received.len() < MAX_STORED_SYMBOLS {
            let room = MAX_STORED_SYMBOLS - received.len();
            received.extend(rx_syms.iter().take(room));
        }
    }
    Ok(BerResult {
        ebn0_db,
        n_bits: total_bits,
        bit_errors,
        ber: bit_errors as f64 / total_bits as f64,
        evm_rms: (err_energy / ref_energy).sqrt(),
        received,
    })
}
