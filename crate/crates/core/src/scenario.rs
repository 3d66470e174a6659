//! End-to-end composition: incident wavefront → array → front-ends → ADC →
//! calibration → beamforming → optional OFDM demodulation.
//!
//! A [`Scenario`] is the single JSON-serializable description of one
//! experiment. Randomness (noise draws, random mismatch, payload bits) is
//! derived from `seed` through fixed salts, so identical scenarios produce
//! bit-identical outputs no matter how work is scheduled.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::{
    element_gain_amplitude, elevation_broadside_amplitude, steering_vector, ArrayGeometry,
    ElementPattern, Pattern, TaperSpec,
};
use crate::backend::{
    adc_sample, apply_calibration_streams, beam_energy_sweep, beamform_streams,
    estimate_calibration, AdcConfig, BeamWeights, CalibrationSet,
};
use crate::budget::{
    budget_report, cascade_analysis, required_snr_db, sensitivity_dbm, BudgetReport,
    LinkRequirement, OfdmParams,
};
use crate::error::{Error, Result};
use crate::frontend::{simulate_frontend, ChannelSet, FrontendConfig, MismatchSpec};
use crate::ofdm::{ofdm_demodulate, ofdm_modulate, qam_demap, qam_map, MAX_STORED_SYMBOLS};
use crate::signal::{projection_coefficient, watts_to_dbm, IqStream, NOISE_FLOOR_DBM_PER_HZ};

/// Salt for the payload-bit generator.
const BITS_SALT: u64 = 0xB175;
/// Salt for per-run front-end noise.
const FRONTEND_SALT: u64 = 0xF0;
/// Salt for drawing random channel mismatches.
const MISMATCH_SALT: u64 = 0x313;

/// Splitmix64-style combination of a seed and a stream label; used to carve
/// independent deterministic sub-streams out of one scenario seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stimulus {
    /// Continuous wave at `rf_freq_hz` arriving from `doa_deg`.
    Tone {
        rf_freq_hz: f64,
        power_dbm: f64,
        doa_deg: f64,
    },
    /// OFDM burst (numerology from the scenario) on the front-end's RF
    /// center, arriving from `doa_deg`.
    Ofdm { power_dbm: f64, doa_deg: f64 },
}

impl Stimulus {
    pub fn doa_deg(&self) -> f64 {
        match *self {
            Stimulus::Tone { doa_deg, .. } | Stimulus::Ofdm { doa_deg, .. } => doa_deg,
        }
    }

    pub fn power_dbm(&self) -> f64 {
        match *self {
            Stimulus::Tone { power_dbm, .. } | Stimulus::Ofdm { power_dbm, .. } => power_dbm,
        }
    }
}

impl Default for Stimulus {
    fn default() -> Self {
        // Backed off from the budget's assumed −85 dBm input so the default
        // converter (full scale 0 dBm) stays in range behind a +15 dB VGA.
        Stimulus::Tone { rf_freq_hz: 28.2e9, power_dbm: -110.0, doa_deg: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightSpec {
    pub target_angle_deg: f64,
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec { target_angle_deg: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct CalibrationPolicy {
    pub enabled: bool,
    pub reference_index: usize,
}

/// Bounds for drawing per-channel mismatches when a scenario asks for them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomMismatch {
    pub max_gain_db: f64,
    pub max_phase_deg: f64,
}

impl Default for RandomMismatch {
    fn default() -> Self {
        RandomMismatch { max_gain_db: 3.0, max_phase_deg: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    /// Taper applied when analyzing this geometry's pattern.
    pub taper: TaperSpec,
    /// Feed taper of the fixed 8-element elevation sub-array behind each
    /// azimuth channel; sets the per-element scalar gain.
    pub elevation_taper: TaperSpec,
    pub element_pattern: ElementPattern,
    pub frontend: FrontendConfig,
    pub adc: AdcConfig,
    pub ofdm: OfdmParams,
    pub stimulus: Stimulus,
    pub weights: WeightSpec,
    pub requirement: LinkRequirement,
    pub calibration: CalibrationPolicy,
    /// When set, per-channel mismatches are drawn from the seed within these
    /// bounds; [`Scenario::resolve`] materializes them into `frontend`.
    pub random_mismatch: Option<RandomMismatch>,
    pub seed: u64,
    /// Samples per tone capture.
    pub n_samples: usize,
    /// OFDM frames per constellation run.
    pub n_frames: usize,
    /// Payload size for bit-error runs.
    pub ber_bits: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            geometry: ArrayGeometry::default(),
            taper: TaperSpec::Uniform,
            elevation_taper: TaperSpec::LinearPedestal { pedestal_db: -6.0 },
            element_pattern: ElementPattern::Isotropic,
            frontend: FrontendConfig::default(),
            adc: AdcConfig::default(),
            ofdm: OfdmParams::default(),
            stimulus: Stimulus::default(),
            weights: WeightSpec::default(),
            requirement: LinkRequirement::default(),
            calibration: CalibrationPolicy::default(),
            random_mismatch: None,
            seed: 1,
            n_samples: 4096,
            n_frames: 10_000,
            ber_bits: 1_000_000,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.frontend.validate()?;
        self.adc.validate()?;
        self.ofdm.validate()?;
        let doa = self.stimulus.doa_deg();
        if !(-90.0..=90.0).contains(&doa) {
            return Err(Error::invalid(format!("arrival angle {doa}° outside [-90°, 90°]")));
        }
        if !(-90.0..=90.0).contains(&self.weights.target_angle_deg) {
            return Err(Error::invalid("steer target outside [-90°, 90°]"));
        }
        if !self.stimulus.power_dbm().is_finite() {
            return Err(Error::invalid("stimulus power must be finite"));
        }
        if self.calibration.reference_index >= self.geometry.n_elements {
            return Err(Error::invalid("calibration reference channel out of range"));
        }
        if !self.frontend.mismatch.is_empty()
            && self.frontend.mismatch.len() != self.geometry.n_elements
        {
            return Err(Error::invalid(format!(
                "{} mismatch entries for {} elements",
                self.frontend.mismatch.len(),
                self.geometry.n_elements
            )));
        }
        if let Some(r) = &self.random_mismatch {
            if !self.frontend.mismatch.is_empty() {
                return Err(Error::invalid(
                    "scenario sets both explicit and random mismatch; pick one",
                ));
            }
            if r.max_gain_db < 0.0 || r.max_phase_deg < 0.0 {
                return Err(Error::invalid("random mismatch bounds must be non-negative"));
            }
        }
        if self.n_samples < 16 {
            return Err(Error::invalid("captures need at least 16 samples"));
        }
        if self.n_frames == 0 || self.ber_bits == 0 {
            return Err(Error::invalid("frame and bit counts must be positive"));
        }
        Ok(())
    }

    /// Validates and materializes seed-drawn pieces (random mismatch) so the
    /// returned scenario is fully explicit — it re-runs identically and is
    /// what run manifests should record.
    pub fn resolve(&self) -> Result<Scenario> {
        self.validate()?;
        let mut sc = self.clone();
        if let Some(r) = sc.random_mismatch.take() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(sc.seed, MISMATCH_SALT));
            sc.frontend.mismatch = (0..sc.geometry.n_elements)
                .map(|_| MismatchSpec {
                    gain_err_db: rng.random_range(-r.max_gain_db..=r.max_gain_db),
                    phase_err_deg: rng.random_range(-r.max_phase_deg..=r.max_phase_deg),
                })
                .collect();
        }
        Ok(sc)
    }

    /// Advisory strings for downstream metadata: modeling stand-ins that a
    /// reader of the outputs should know about.
    pub fn notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if let ElementPattern::CosinePower { exponent } = self.element_pattern {
            notes.push(format!(
                "azimuth element pattern is a cosine-power stand-in (exponent {exponent}), \
                 not a measured element response"
            ));
        }
        notes.push(format!(
            "assumed per-element input level {} dBm is a configuration default, \
             not a measured link",
            self.requirement.input_level_dbm
        ));
        notes
    }

    /// Effective noise seed for front-end runs: both the scenario seed and
    /// the front-end's own seed field contribute.
    fn noise_root(&self) -> u64 {
        mix_seed(mix_seed(self.seed, self.frontend.noise_seed), FRONTEND_SALT)
    }

    /// Per-element complex coefficients of a plane wave from `doa_deg`:
    /// steering phases at the actual carrier, the elevation sub-array's
    /// broadside amplitude, and the azimuth element pattern.
    fn element_coefficients(&self, doa_deg: f64, rf_freq_hz: f64) -> Result<Vec<Complex64>> {
        let v = steering_vector(&self.geometry, doa_deg, rf_freq_hz)?;
        let s_el = elevation_broadside_amplitude(&self.elevation_taper)?;
        let g_az = element_gain_amplitude(&self.element_pattern, doa_deg);
        Ok(v.iter().map(|p| p * s_el * g_az).collect())
    }

    fn wavefront(&self, base: &IqStream, doa_deg: f64, rf_freq_hz: f64) -> Result<ChannelSet> {
        let coeffs = self.element_coefficients(doa_deg, rf_freq_hz)?;
        ChannelSet::new(coeffs.iter().map(|c| base.scaled(*c)).collect())
    }

    /// Gain from "per-element incident power" to "power at one front-end
    /// input", in dB: elevation feed plus azimuth element rolloff.
    pub fn element_feed_gain_db(&self, doa_deg: f64) -> Result<f64> {
        let s_el = elevation_broadside_amplitude(&self.elevation_taper)?;
        let g_az = element_gain_amplitude(&self.element_pattern, doa_deg);
        Ok(20.0 * (s_el * g_az).log10())
    }
}

pub fn run_budget(sc: &Scenario) -> Result<BudgetReport> {
    let sc = sc.resolve()?;
    budget_report(&sc.frontend.effective_chain(), &sc.ofdm, &sc.requirement)
}

/// Payload bits, mapped symbols, and the transmit waveform scaled to the
/// stimulus power. `sc` must already be resolved.
fn ofdm_stimulus(sc: &Scenario, power_dbm: f64) -> Result<(Vec<u8>, Vec<Complex64>, IqStream)> {
    let p = &sc.ofdm;
    let bps = p.bits_per_symbol() as usize;
    let n_symbols = sc.n_frames * p.n_data;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(sc.seed, BITS_SALT));
    let bits: Vec<u8> = (0..n_symbols * bps).map(|_| rng.random::<bool>() as u8).collect();
    let syms = qam_map(&bits, p.modulation_order)?;
    let wave = ofdm_modulate(p, &syms)?;
    let raw_power = wave.iter().map(|s| s.norm_sqr()).sum::<f64>() / wave.len() as f64;
    let scale = (crate::signal::dbm_to_watts(power_dbm) / raw_power).sqrt();
    let samples: Vec<Complex64> = wave.iter().map(|s| s * scale).collect();
    let base = IqStream::new(samples, p.sampled_bandwidth_hz(), sc.frontend.rf_center_hz)?;
    Ok((bits, syms, base))
}

/// The per-channel front-end outputs (at IF, before the converter) for the
/// scenario's stimulus — the streams the downstream operations consume, and
/// what a raw capture dump contains.
pub fn frontend_capture(sc: &Scenario) -> Result<ChannelSet> {
    let sc = sc.resolve()?;
    match sc.stimulus {
        Stimulus::Tone { rf_freq_hz, power_dbm, doa_deg } => {
            let offset = rf_freq_hz - sc.frontend.rf_center_hz;
            let tone = crate::signal::make_tone(
                offset,
                sc.adc.sample_rate_hz,
                power_dbm,
                0.0,
                sc.n_samples,
            )?;
            let base =
                IqStream::new(tone.samples, sc.adc.sample_rate_hz, sc.frontend.rf_center_hz)?;
            let channels = sc.wavefront(&base, doa_deg, rf_freq_hz)?;
            // Same sub-seed a sweep uses at this angle.
            let cfg = FrontendConfig {
                noise_seed: mix_seed(sc.noise_root(), doa_deg.to_bits()),
                ..sc.frontend.clone()
            };
            simulate_frontend(&channels, &cfg)
        }
        Stimulus::Ofdm { power_dbm, doa_deg } => {
            let (_, _, base) = ofdm_stimulus(&sc, power_dbm)?;
            let channels = sc.wavefront(&base, doa_deg, sc.frontend.rf_center_hz)?;
            let cfg = FrontendConfig { noise_seed: sc.noise_root(), ..sc.frontend.clone() };
            simulate_frontend(&channels, &cfg)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub measured: Pattern,
    pub analytic: Pattern,
    pub peak_angle_deg: f64,
    /// Peak offset from the steering target.
    pub peak_error_deg: f64,
    /// Largest |measured − analytic| over grid points where either pattern
    /// is above the numeric floor.
    pub max_abs_deviation_db: f64,
    pub notes: Vec<String>,
}

/// Emulates the rotating-source measurement: the stimulus tone is replayed
/// from every grid angle through the full pipeline (front end, converter,
/// optional calibration, beamformer) while the weights stay fixed, and the
/// measured energy pattern is compared against the closed-form array factor
/// (including the element pattern) on the same grid.
pub fn run_beam_sweep(sc: &Scenario, grid_deg: &[f64]) -> Result<SweepResult> {
    let sc = sc.resolve()?;
    let (rf_freq_hz, power_dbm) = match sc.stimulus {
        Stimulus::Tone { rf_freq_hz, power_dbm, .. } => (rf_freq_hz, power_dbm),
        Stimulus::Ofdm { .. } => {
            return Err(Error::invalid("beam sweeps need a tone stimulus"));
        }
    };
    let offset = rf_freq_hz - sc.frontend.rf_center_hz;
    let tone =
        crate::signal::make_tone(offset, sc.adc.sample_rate_hz, power_dbm, 0.0, sc.n_samples)?;
    let base = IqStream::new(tone.samples, sc.adc.sample_rate_hz, sc.frontend.rf_center_hz)?;
    let weights = BeamWeights::steer(&sc.geometry, sc.weights.target_angle_deg, rf_freq_hz)?;
    let cal = if sc.calibration.enabled { Some(run_calibrate(&sc)?.set) } else { None };
    let noise_root = sc.noise_root();
    let source = |doa: f64| -> Result<ChannelSet> {
        let channels = sc.wavefront(&base, doa, rf_freq_hz)?;
        let cfg = FrontendConfig {
            noise_seed: mix_seed(noise_root, doa.to_bits()),
            ..sc.frontend.clone()
        };
        simulate_frontend(&channels, &cfg)
    };
    let measured = beam_energy_sweep(source, &weights, grid_deg, Some(&sc.adc), cal.as_ref())?;

    let analytic_power: Vec<f64> = grid_deg
        .iter()
        .map(|&theta| {
            let v = steering_vector(&sc.geometry, theta, rf_freq_hz)?;
            let g = element_gain_amplitude(&sc.element_pattern, theta);
            let sum: Complex64 = v.iter().zip(&weights.weights).map(|(a, w)| a * w).sum();
            Ok((sum * g).norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()?;
    let analytic = Pattern::from_power(grid_deg.to_vec(), analytic_power)?;

    let (peak_angle_deg, _) = measured.peak();
    let mut max_abs_deviation_db = 0.0f64;
    for (m, a) in measured.magnitude_db.iter().zip(&analytic.magnitude_db) {
        if *m <= -290.0 && *a <= -290.0 {
            continue; // both at the numeric floor (pattern nulls)
        }
        max_abs_deviation_db = max_abs_deviation_db.max((m - a).abs());
    }
    Ok(SweepResult {
        measured,
        analytic,
        peak_angle_deg,
        peak_error_deg: peak_angle_deg - sc.weights.target_angle_deg,
        max_abs_deviation_db,
        notes: sc.notes(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstellationPoint {
    pub re: f64,
    pub im: f64,
    /// Hard-decided constellation index (the symbol's bits, MSB first).
    pub decided: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstellationReport {
    pub n_symbols: usize,
    pub symbol_errors: usize,
    pub bit_errors: usize,
    /// RMS error after the single complex equalizer, as a fraction.
    pub evm_rms: f64,
    /// SNR implied by the equalizer residual.
    pub effective_snr_db: f64,
    /// Per-carrier post-beamforming SNR the noise budget predicts; absent
    /// when the front-end noise is disabled.
    pub predicted_snr_db: Option<f64>,
    /// Budget sensitivity for this numerology at the required Eb/N0.
    pub sensitivity_dbm: f64,
    /// Power delivered to one front-end input.
    pub input_at_chain_dbm: f64,
    pub margin_db: f64,
    pub clipped_samples: usize,
    /// Equalized received symbols, capped at [`MAX_STORED_SYMBOLS`].
    pub constellation: Vec<ConstellationPoint>,
    pub notes: Vec<String>,
}

/// Runs the OFDM stimulus through the whole receive pipeline and reports the
/// demodulated constellation. The converter rate is retargeted to the OFDM
/// sample rate (there is no resampler in the model).
pub fn run_constellation(sc: &Scenario) -> Result<ConstellationReport> {
    let sc = sc.resolve()?;
    let (power_dbm, doa_deg) = match sc.stimulus {
        Stimulus::Ofdm { power_dbm, doa_deg } => (power_dbm, doa_deg),
        Stimulus::Tone { .. } => {
            return Err(Error::invalid("constellation runs need an ofdm stimulus"));
        }
    };
    let p = &sc.ofdm;
    let rate = p.sampled_bandwidth_hz();
    let mut notes = sc.notes();
    let adc = AdcConfig { sample_rate_hz: rate, ..sc.adc };
    adc.validate()?;
    if sc.adc.sample_rate_hz != rate {
        notes.push(format!(
            "converter rate retargeted from {} to the waveform rate {} (no resampler modeled)",
            sc.adc.sample_rate_hz, rate
        ));
    }

    // Payload and transmit waveform, scaled to the stimulus power.
    let bps = p.bits_per_symbol() as usize;
    let n_symbols = sc.n_frames * p.n_data;
    let (tx_bits, tx_syms, base) = ofdm_stimulus(&sc, power_dbm)?;

    // Array, front ends, converter.
    let channels = sc.wavefront(&base, doa_deg, sc.frontend.rf_center_hz)?;
    let cfg = FrontendConfig { noise_seed: sc.noise_root(), ..sc.frontend.clone() };
    let at_if = simulate_frontend(&channels, &cfg)?;
    let mut clipped = 0usize;
    let mut captured = Vec::with_capacity(at_if.n_channels());
    for s in &at_if.streams {
        let (q, rep) = adc_sample(s, &adc)?;
        clipped += rep.clipped_samples;
        captured.push(q);
    }
    let mut captured = ChannelSet::new(captured)?;

    if sc.calibration.enabled {
        let cal = run_calibrate(&sc)?.set;
        captured = apply_calibration_streams(&captured, &cal)?;
    }
    let weights =
        BeamWeights::steer(&sc.geometry, sc.weights.target_angle_deg, sc.frontend.rf_center_hz)?;
    let beam = beamform_streams(&captured, &weights)?;

    // Demodulate, equalize with one complex constant, decide.
    let rx_syms = ofdm_demodulate(p, &beam.samples)?;
    let alpha = projection_coefficient(&tx_syms, &rx_syms)?;
    let eq: Vec<Complex64> = rx_syms.iter().map(|r| r / alpha).collect();
    let rx_bits = qam_demap(&eq, p.modulation_order)?;
    let bit_errors = tx_bits.iter().zip(&rx_bits).filter(|(a, b)| a != b).count();
    let symbol_errors = tx_bits
        .chunks_exact(bps)
        .zip(rx_bits.chunks_exact(bps))
        .filter(|(a, b)| a != b)
        .count();
    let mut err_energy = 0.0;
    let mut ref_energy = 0.0;
    for (t, r) in tx_syms.iter().zip(&eq) {
        err_energy += (r - t).norm_sqr();
        ref_energy += t.norm_sqr();
    }
    let evm_rms = (err_energy / ref_energy).sqrt();
    let effective_snr_db = 10.0 * (ref_energy / err_energy).log10();

    let feed_gain_db = sc.element_feed_gain_db(doa_deg)?;
    let input_at_chain_dbm = power_dbm + feed_gain_db;
    let if_hz = sc.frontend.if_center_hz();
    let cas = cascade_analysis(&sc.frontend.effective_chain(), if_hz)?;
    let predicted_snr_db = sc.frontend.noise_enabled.then(|| {
        input_at_chain_dbm
            - 10.0 * (p.n_data as f64).log10()
            - (NOISE_FLOOR_DBM_PER_HZ + 10.0 * p.subcarrier_spacing_hz.log10())
            - cas.nf_db
            + 10.0 * (sc.geometry.n_elements as f64).log10()
    });
    let required = required_snr_db(p, sc.requirement.ebn0_db)?;
    let sensitivity = sensitivity_dbm(cas.nf_db, p.occupied_bandwidth_hz(), required)?;

    let constellation = eq
        .iter()
        .zip(rx_bits.chunks_exact(bps))
        .take(MAX_STORED_SYMBOLS)
        .map(|(v, bits)| ConstellationPoint {
            re: v.re,
            im: v.im,
            decided: bits.iter().fold(0u32, |acc, b| (acc << 1) | *b as u32),
        })
        .collect();

    Ok(ConstellationReport {
        n_symbols,
        symbol_errors,
        bit_errors,
        evm_rms,
        effective_snr_db,
        predicted_snr_db,
        sensitivity_dbm: sensitivity,
        input_at_chain_dbm,
        margin_db: input_at_chain_dbm - sensitivity,
        clipped_samples: clipped,
        constellation,
        notes,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub set: CalibrationSet,
    /// Worst per-channel relative residual ‖c_i·ch_i − ref‖/‖ref‖ on the
    /// calibration capture itself.
    pub residual: f64,
    /// Beamformed power over the reference channel's power after applying
    /// the constants, with broadside unit weights.
    pub coherent_gain_db: f64,
}

/// Captures a broadside reference tone through the front ends and converter,
/// estimates one complex constant per channel against the reference channel,
/// and reports how coherent the corrected channels are.
pub fn run_calibrate(sc: &Scenario) -> Result<CalibrationOutcome> {
    let sc = sc.resolve()?;
    let rf = sc.frontend.rf_center_hz;
    let tone = crate::signal::make_tone(
        0.0,
        sc.adc.sample_rate_hz,
        sc.stimulus.power_dbm(),
        0.0,
        sc.n_samples,
    )?;
    let base = IqStream::new(tone.samples, sc.adc.sample_rate_hz, rf)?;
    let channels = sc.wavefront(&base, 0.0, rf)?;
    let cfg =
        FrontendConfig { noise_seed: mix_seed(sc.noise_root(), 0xCA1), ..sc.frontend.clone() };
    let at_if = simulate_frontend(&channels, &cfg)?;
    let mut captured = Vec::with_capacity(at_if.n_channels());
    for s in &at_if.streams {
        captured.push(adc_sample(s, &sc.adc)?.0);
    }
    let captured = ChannelSet::new(captured)?;
    let set = estimate_calibration(&captured, sc.calibration.reference_index)?;
    let fixed = apply_calibration_streams(&captured, &set)?;
    let reference = &fixed.streams[sc.calibration.reference_index];
    let ref_norm = reference.samples.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let mut residual = 0.0f64;
    for s in &fixed.streams {
        let err: f64 = s
            .samples
            .iter()
            .zip(&reference.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        residual = residual.max(err / ref_norm);
    }
    let unit = BeamWeights {
        weights: vec![Complex64::new(1.0, 0.0); fixed.n_channels()],
        target_angle_deg: 0.0,
    };
    let beam = beamform_streams(&fixed, &unit)?;
    let coherent_gain_db = watts_to_dbm(beam.power_watts()) - watts_to_dbm(reference.power_watts());
    Ok(CalibrationOutcome { set, residual, coherent_gain_db })
}
