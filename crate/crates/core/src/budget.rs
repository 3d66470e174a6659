//! Link-budget arithmetic: OFDM throughput, SNR requirements, Friis cascade
//! analysis of the receiver chain, and sensitivity.
//!
//! The cascade model tracks gain (dB sum), noise figure (Friis), and OIP3
//! (reciprocal sum referred to the chain output, passive stages skipped).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{db_to_linear, linear_to_db, NOISE_FLOOR_DBM_PER_HZ};

const SUPPORTED_QAM_ORDERS: [usize; 5] = [4, 16, 64, 256, 1024];

/// OFDM numerology. Defaults model a 512-carrier 64-QAM waveform with a 1/8
/// guard interval, 336 data subcarriers and 1.65 MHz subcarrier spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmParams {
    pub n_fft: usize,
    /// Square-QAM order M.
    pub modulation_order: usize,
    /// Cyclic-prefix fraction of the FFT length.
    pub guard_interval: f64,
    /// Active (data) subcarriers.
    pub n_data: usize,
    pub subcarrier_spacing_hz: f64,
}

impl Default for OfdmParams {
    fn default() -> Self {
        OfdmParams {
            n_fft: 512,
            modulation_order: 64,
            guard_interval: 0.125,
            n_data: 336,
            subcarrier_spacing_hz: 1.65e6,
        }
    }
}

impl OfdmParams {
    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_QAM_ORDERS.contains(&self.modulation_order) {
            return Err(Error::invalid(format!(
                "modulation order {} is not a supported square-QAM size {:?}",
                self.modulation_order, SUPPORTED_QAM_ORDERS
            )));
        }
        if self.n_fft == 0 || !self.n_fft.is_power_of_two() {
            return Err(Error::invalid(format!("n_fft {} must be a power of two", self.n_fft)));
        }
        if self.n_data == 0 || self.n_data > self.n_fft - 1 {
            // DC is never used, so at most n_fft − 1 bins carry data.
            return Err(Error::invalid(format!(
                "n_data {} must be in 1..={}",
                self.n_data,
                self.n_fft - 1
            )));
        }
        if !(self.guard_interval >= 0.0 && self.guard_interval < 1.0) {
            return Err(Error::invalid(format!(
                "guard interval {} must be in [0, 1)",
                self.guard_interval
            )));
        }
        if !(self.subcarrier_spacing_hz > 0.0 && self.subcarrier_spacing_hz.is_finite()) {
            return Err(Error::invalid("subcarrier spacing must be positive"));
        }
        let cp = self.guard_interval * self.n_fft as f64;
        if (cp - cp.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "guard interval {} does not give an integer cyclic prefix for n_fft {}",
                self.guard_interval, self.n_fft
            )));
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.modulation_order.trailing_zeros()
    }

    pub fn cyclic_prefix_len(&self) -> usize {
        (self.guard_interval * self.n_fft as f64).round() as usize
    }

    /// Bandwidth actually occupied by data subcarriers.
    pub fn occupied_bandwidth_hz(&self) -> f64 {
        self.n_data as f64 * self.subcarrier_spacing_hz
    }

    /// Full FFT span (the natural complex sample rate of the waveform).
    pub fn sampled_bandwidth_hz(&self) -> f64 {
        self.n_fft as f64 * self.subcarrier_spacing_hz
    }
}

/// Uncoded bit rate: log2(M) · N_D · Δf / (1 + GI).
pub fn ofdm_data_rate_bps(p: &OfdmParams) -> Result<f64> {
    p.validate()?;
    Ok(p.bits_per_symbol() as f64 * p.n_data as f64 * p.subcarrier_spacing_hz
        / (1.0 + p.guard_interval))
}

/// Demodulator-input SNR required to run at a given Eb/N0:
/// Eb/N0 + 10·log10(log2(M)·N_D / ((1+GI)·N_FFT)).
///
/// The SNR is referenced to the full sampled band (N_FFT·Δf); the N_D/N_FFT
/// term is the processing gain of occupying only part of it, and (1+GI)
/// charges the cyclic-prefix overhead.
pub fn required_snr_db(p: &OfdmParams, ebn0_db: f64) -> Result<f64> {
    p.validate()?;
    Ok(ebn0_db
        + linear_to_db(
            p.bits_per_symbol() as f64 * p.n_data as f64
                / ((1.0 + p.guard_interval) * p.n_fft as f64),
        ))
}

/// Stage gain: flat, sloped across the IF band (linear-in-dB interpolation
/// between the band-edge values), or adjustable (resolved by the chain's
/// `vga_setting_db`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Flat(f64),
    /// [gain at IF band start, gain at IF band end].
    Sloped([f64; 2]),
    Adjustable {
        min_db: f64,
        max_db: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub gain_db: GainSpec,
    pub nf_db: f64,
    /// Output-referred third-order intercept. Absent for passive stages,
    /// which are skipped in the OIP3 cascade.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oip3_dbm: Option<f64>,
}

impl ComponentSpec {
    pub fn flat(name: &str, gain_db: f64, nf_db: f64, oip3_dbm: Option<f64>) -> Self {
        ComponentSpec { name: name.into(), gain_db: GainSpec::Flat(gain_db), nf_db, oip3_dbm }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |g: f64| -> Result<()> {
            if !g.is_finite() {
                Err(Error::invalid(format!("stage '{}' gain must be finite", self.name)))
            } else {
                Ok(())
            }
        };
        match self.gain_db {
            GainSpec::Flat(g) => check(g)?,
            GainSpec::Sloped([a, b]) => {
                check(a)?;
                check(b)?;
            }
            GainSpec::Adjustable { min_db, max_db } => {
                check(min_db)?;
                check(max_db)?;
                if min_db > max_db {
                    return Err(Error::invalid(format!(
                        "stage '{}' adjustable range is inverted",
                        self.name
                    )));
                }
            }
        }
        if !(self.nf_db >= 0.0 && self.nf_db.is_finite()) {
            return Err(Error::invalid(format!(
                "stage '{}' noise figure must be finite and >= 0",
                self.name
            )));
        }
        // A lossy stage with no intercept point is passive: its noise figure
        // must equal its loss.
        if self.oip3_dbm.is_none() {
            if let GainSpec::Flat(g) = self.gain_db {
                if g < 0.0 && (self.nf_db + g).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "passive stage '{}' must have NF = |gain| ({} dB loss, NF {} dB)",
                        self.name, -g, self.nf_db
                    )));
                }
            }
        }
        if let Some(o) = self.oip3_dbm {
            if !o.is_finite() {
                return Err(Error::invalid(format!("stage '{}' OIP3 must be finite", self.name)));
            }
        }
        Ok(())
    }
}

/// A receiver chain: ordered stages, the VGA setting applied to adjustable
/// stages, and the IF band over which sloped gains are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub stages: Vec<ComponentSpec>,
    #[serde(default)]
    pub vga_setting_db: f64,
    /// (band start, band end) in Hz.
    pub if_band_hz: (f64, f64),
}

impl Default for ChainSpec {
    fn default() -> Self {
        reference_chain()
    }
}

/// The receiver line-up modeled throughout: 28 GHz LNA, IQ downconverter,
/// 900 MHz low-pass, sloped IF amplifier, variable-gain amplifier.
pub fn reference_chain() -> ChainSpec {
    ChainSpec {
        stages: vec![
            ComponentSpec::flat("lna", 19.0, 2.5, Some(20.0)),
            ComponentSpec::flat("downconverter", 9.0, 3.0, Some(14.0)),
            ComponentSpec::flat("if_lpf", -1.0, 1.0, None),
            ComponentSpec {
                name: "if_amp".into(),
                gain_db: GainSpec::Sloped([31.5, 24.0]),
                nf_db: 2.6,
                oip3_dbm: Some(24.4),
            },
            ComponentSpec {
                name: "vga".into(),
                gain_db: GainSpec::Adjustable { min_db: -15.0, max_db: 15.0 },
                nf_db: 9.0,
                oip3_dbm: Some(39.0),
            },
        ],
        vga_setting_db: 15.0,
        if_band_hz: (0.15e9, 1.0e9),
    }
}

/// Output transformer stage that can be appended after the VGA.
pub fn balun_stage() -> ComponentSpec {
    ComponentSpec::flat("balun", -1.0, 1.0, None)
}

/// A stage with its gain fixed at a specific evaluation frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedStage {
    pub name: String,
    pub gain_db: f64,
    pub nf_db: f64,
    pub oip3_dbm: Option<f64>,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::invalid("chain must have at least one stage"));
        }
        for s in &self.stages {
            s.validate()?;
        }
        let (lo, hi) = self.if_band_hz;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
            return Err(Error::invalid(format!("IF band ({lo}, {hi}) is not a valid interval")));
        }
        for s in &self.stages {
            if let GainSpec::Adjustable { min_db, max_db } = s.gain_db {
                if self.vga_setting_db < min_db || self.vga_setting_db > max_db {
                    return Err(Error::invalid(format!(
                        "VGA setting {} dB outside stage '{}' range [{}, {}]",
                        self.vga_setting_db, s.name, min_db, max_db
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mid_band_hz(&self) -> f64 {
        0.5 * (self.if_band_hz.0 + self.if_band_hz.1)
    }

    /// Fix every stage gain at `eval_freq_hz` (clamped to the IF band for
    /// sloped interpolation).
    pub fn resolve(&self, eval_freq_hz: f64) -> Result<Vec<ResolvedStage>> {
        self.validate()?;
        if !(eval_freq_hz.is_finite() && eval_freq_hz > 0.0) {
            return Err(Error::invalid("evaluation frequency must be positive"));
        }
        let (lo, hi) = self.if_band_hz;
        let f = eval_freq_hz.clamp(lo, hi);
        let t = (f - lo) / (hi - lo);
        Ok(self
            .stages
            .iter()
            .map(|s| ResolvedStage {
                name: s.name.clone(),
                gain_db: match s.gain_db {
                    GainSpec::Flat(g) => g,
                    GainSpec::Sloped([a, b]) => a + (b - a) * t,
                    GainSpec::Adjustable { .. } => self.vga_setting_db,
                },
                nf_db: s.nf_db,
                oip3_dbm: s.oip3_dbm,
            })
            .collect())
    }

    pub fn with_balun(&self) -> ChainSpec {
        let mut c = self.clone();
        c.stages.push(balun_stage());
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    pub gain_db: f64,
    pub nf_db: f64,
    /// None when no stage declares an intercept point.
    pub oip3_dbm: Option<f64>,
}

/// Friis cascade at a single evaluation frequency.
///
/// Gain is the exact dB sum of stage gains. NF follows
/// F = F1 + Σ (Fk − 1)/Π G(before k). OIP3 (output-referred, linear mW):
/// 1/OIP3 = Σ 1/(OIP3_k · Π G(after k)), stages without OIP3 skipped.
pub fn cascade_analysis(chain: &ChainSpec, eval_freq_hz: f64) -> Result<CascadeResult> {
    let stages = chain.resolve(eval_freq_hz)?;

    let gain_db: f64 = stages.iter().map(|s| s.gain_db).sum();

    let mut f_cascade = 0.0;
    let mut g_before = 1.0;
    for (i, s) in stages.iter().enumerate() {
        let f = db_to_linear(s.nf_db);
        if i == 0 {
            f_cascade = f;
        } else {
            f_cascade += (f - 1.0) / g_before;
        }
        g_before *= db_to_linear(s.gain_db);
    }

    let mut inv_oip3 = 0.0;
    for (i, s) in stages.iter().enumerate() {
        let Some(oip3) = s.oip3_dbm else { continue };
        let gain_after_db: f64 = stages[i + 1..].iter().map(|t| t.gain_db).sum();
        inv_oip3 += 1.0 / db_to_linear(oip3 + gain_after_db); // linear mW
    }
    let oip3_dbm = (inv_oip3 > 0.0).then(|| linear_to_db(1.0 / inv_oip3));

    Ok(CascadeResult { gain_db, nf_db: linear_to_db(f_cascade), oip3_dbm })
}

/// Minimum detectable input level: floor/Hz + 10·log10(B) + NF + required SNR,
/// using the conventional −173.98 dBm/Hz figure.
pub fn sensitivity_dbm(nf_db: f64, bandwidth_hz: f64, required_snr_db: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    Ok(NOISE_FLOOR_DBM_PER_HZ + linear_to_db(bandwidth_hz) + nf_db + required_snr_db)
}

/// System thresholds a budget is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkRequirement {
    pub ebn0_db: f64,
    /// Maximum allowed cascade noise figure.
    pub nf_max_db: f64,
    /// Minimum required cascade gain.
    pub gain_min_db: f64,
    /// Per-element antenna gain assumed by the system budget (not part of
    /// the chain cascade; carried for reporting).
    pub element_gain_db: f64,
    /// Assumed input signal level at one element.
    pub input_level_dbm: f64,
}

impl Default for LinkRequirement {
    fn default() -> Self {
        LinkRequirement {
            ebn0_db: 17.8,
            nf_max_db: 5.8,
            gain_min_db: 55.0,
            element_gain_db: 15.0,
            input_level_dbm: -85.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub data_rate_bps: f64,
    pub required_snr_db: f64,
    pub ebn0_db: f64,
    pub occupied_bandwidth_hz: f64,
    pub sampled_bandwidth_hz: f64,
    pub cascade_mid: CascadeResult,
    pub cascade_band_start: CascadeResult,
    pub cascade_band_end: CascadeResult,
    /// Sensitivity over the occupied bandwidth at nf_max/required SNR.
    pub sensitivity_dbm: f64,
    pub input_level_dbm: f64,
    pub element_gain_db: f64,
    pub nf_max_db: f64,
    pub gain_min_db: f64,
    pub nf_pass: bool,
    pub gain_pass: bool,
    pub pass: bool,
}

impl std::fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(f, "link budget")?;
        writeln!(f, "  data rate            {:>12.4} Gbps", self.data_rate_bps / 1e9)?;
        writeln!(
            f,
            "  required SNR         {:>12.2} dB   (Eb/N0 {:.2} dB)",
            self.required_snr_db, self.ebn0_db
        )?;
        writeln!(
            f,
            "  occupied bandwidth   {:>12.2} MHz  (FFT span {:.2} MHz)",
            self.occupied_bandwidth_hz / 1e6,
            self.sampled_bandwidth_hz / 1e6
        )?;
        let row = |f: &mut std::fmt::Formatter<'_>, label: &str, c: &CascadeResult| {
            writeln!(
                f,
                "  {label:<20} {:>8.2} dB gain, {:>6.2} dB NF, {} OIP3",
                c.gain_db,
                c.nf_db,
                c.oip3_dbm.map_or("n/a".into(), |o| format!("{o:.1} dBm"))
            )
        };
        row(f, "cascade (mid-band)", &self.cascade_mid)?;
        row(f, "cascade (band start)", &self.cascade_band_start)?;
        row(f, "cascade (band end)", &self.cascade_band_end)?;
        writeln!(f, "  sensitivity          {:>12.2} dBm", self.sensitivity_dbm)?;
        writeln!(
            f,
            "  input level          {:>12.2} dBm  (element gain {:.1} dB)",
            self.input_level_dbm, self.element_gain_db
        )?;
        writeln!(
            f,
            "  NF   {:>6.2} dB vs max {:>6.2} dB   [{}]",
            self.cascade_mid.nf_db,
            self.nf_max_db,
            mark(self.nf_pass)
        )?;
        writeln!(
            f,
            "  gain {:>6.2} dB vs min {:>6.2} dB   [{}]",
            self.cascade_mid.gain_db,
            self.gain_min_db,
            mark(self.gain_pass)
        )?;
        write!(f, "  overall [{}]", mark(self.pass))
    }
}

/// Bundles rate, SNR requirement, band-edge cascades and sensitivity, with
/// pass/fail against the requirement thresholds.
pub fn budget_report(
    chain: &ChainSpec,
    p: &OfdmParams,
    req: &LinkRequirement,
) -> Result<BudgetReport> {
    let data_rate_bps = ofdm_data_rate_bps(p)?;
    let required = required_snr_db(p, req.ebn0_db)?;
    let cascade_mid = cascade_analysis(chain, chain.mid_band_hz())?;
    let cascade_band_start = cascade_analysis(chain, chain.if_band_hz.0)?;
    let cascade_band_end = cascade_analysis(chain, chain.if_band_hz.1)?;
    let sensitivity = sensitivity_dbm(req.nf_max_db, p.occupied_bandwidth_hz(), required)?;
    let nf_pass = cascade_mid.nf_db <= req.nf_max_db;
    let gain_pass = cascade_mid.gain_db >= req.gain_min_db;
    Ok(BudgetReport {
        data_rate_bps,
        required_snr_db: required,
        ebn0_db: req.ebn0_db,
        occupied_bandwidth_hz: p.occupied_bandwidth_hz(),
        sampled_bandwidth_hz: p.sampled_bandwidth_hz(),
        cascade_mid,
        cascade_band_start,
        cascade_band_end,
        sensitivity_dbm: sensitivity,
        input_level_dbm: req.input_level_dbm,
        element_gain_db: req.element_gain_db,
        nf_max_db: req.nf_max_db,
        gain_min_db: req.gain_min_db,
        nf_pass,
        gain_pass,
        pass: nf_pass && gain_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn data_rate_reference_numerology() {
        // 6 bits × 336 carriers × 1.65 MHz / 1.125 = 2.9568 Gbps.
        let r = ofdm_data_rate_bps(&OfdmParams::default()).unwrap();
        assert!((r - 2.9568e9).abs() / 2.9568e9 < 1e-12, "rate {r}");
    }

    #[test]
    fn data_rate_scales_linearly_with_carriers() {
        let mut p = OfdmParams::default();
        let r1 = ofdm_data_rate_bps(&p).unwrap();
        p.n_data = 168;
        let r2 = ofdm_data_rate_bps(&p).unwrap();
        assert!(close(r1 / r2, 2.0, 1e-12));
    }

    #[test]
    fn data_rate_rejects_bad_orders() {
        let mut p = OfdmParams { modulation_order: 5, ..OfdmParams::default() };
        assert!(ofdm_data_rate_bps(&p).is_err());
        p.modulation_order = 128; // non-square
        assert!(ofdm_data_rate_bps(&p).is_err());
        // No room for 512 active carriers once DC is excluded.
        let p = OfdmParams { n_data: 512, ..OfdmParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn required_snr_reference_point() {
        // 17.8 dB Eb/N0 → 17.8 + 10·log10(2016/576) = 23.2407 dB.
        let s = required_snr_db(&OfdmParams::default(), 17.8).unwrap();
        assert!(close(s, 23.240680443502757, 1e-9), "required snr {s}");
        assert!(close(s, 23.24, 0.05));
    }

    #[test]
    fn required_snr_single_carrier() {
        let p = OfdmParams { n_data: 1, ..OfdmParams::default() };
        let s = required_snr_db(&p, 17.8).unwrap();
        assert!(close(s, -2.0227123303956844, 1e-9), "single-carrier snr {s}");
    }

    #[test]
    fn required_snr_monotonic_in_order() {
        let mut last = f64::NEG_INFINITY;
        for m in [4usize, 16, 64, 256, 1024] {
            let p = OfdmParams { modulation_order: m, ..OfdmParams::default() };
            let s = required_snr_db(&p, 17.8).unwrap();
            assert!(s > last, "snr must rise with order: {s} after {last}");
            last = s;
        }
    }

    #[test]
    fn friis_two_stage_hand_case() {
        let chain = ChainSpec {
            stages: vec![
                ComponentSpec::flat("a", 10.0, 3.0, None),
                ComponentSpec::flat("b", 10.0, 10.0, None),
            ],
            vga_setting_db: 0.0,
            if_band_hz: (0.15e9, 1.0e9),
        };
        let c = cascade_analysis(&chain, 0.5e9).unwrap();
        assert!(close(c.gain_db, 20.0, 1e-12));
        // 10·log10(10^0.3 + 9/10)
        assert!(close(c.nf_db, 4.61687917556582, 1e-9), "nf {}", c.nf_db);
        assert!(c.oip3_dbm.is_none());
    }

    #[test]
    fn friis_single_stage_echoes_spec() {
        let chain = ChainSpec {
            stages: vec![ComponentSpec::flat("lna", 19.0, 2.5, Some(20.0))],
            vga_setting_db: 0.0,
            if_band_hz: (0.15e9, 1.0e9),
        };
        let c = cascade_analysis(&chain, 0.5e9).unwrap();
        assert!(close(c.gain_db, 19.0, 1e-12));
        assert!(close(c.nf_db, 2.5, 1e-12));
        assert!(close(c.oip3_dbm.unwrap(), 20.0, 1e-9));
    }

    #[test]
    fn reference_chain_mid_band_cascade() {
        let chain = reference_chain();
        let c = cascade_analysis(&chain, chain.mid_band_hz()).unwrap();
        // 19 + 9 − 1 + 27.75 + 15
        assert!(close(c.gain_db, 69.75, 1e-9), "gain {}", c.gain_db);
        assert!(close(c.nf_db, 2.5355077813745215, 1e-9), "nf {}", c.nf_db);
        assert!(close(c.oip3_dbm.unwrap(), 36.13585283438089, 1e-6), "oip3 {:?}", c.oip3_dbm);
    }

    #[test]
    fn reference_chain_band_edges() {
        let chain = reference_chain();
        let lo = cascade_analysis(&chain, chain.if_band_hz.0).unwrap();
        let hi = cascade_analysis(&chain, chain.if_band_hz.1).unwrap();
        assert!(close(lo.gain_db, 73.5, 1e-9), "band-start gain {}", lo.gain_db);
        assert!(close(hi.gain_db, 66.0, 1e-9), "band-end gain {}", hi.gain_db);
        // NF is essentially flat across the band.
        assert!(close(lo.nf_db, 2.5355, 1e-3));
        assert!(close(hi.nf_db, 2.5356, 1e-3));
    }

    #[test]
    fn if_amp_interpolation_points() {
        let chain = reference_chain();
        let g_at =
            |f: f64| chain.resolve(f).unwrap().iter().find(|s| s.name == "if_amp").unwrap().gain_db;
        assert!(close(g_at(0.15e9), 31.5, 1e-12));
        assert!(close(g_at(1.0e9), 24.0, 1e-12));
        assert!(close(g_at(0.575e9), 27.75, 1e-12));
        assert!(close(g_at(0.3e9), 30.176470588235293, 1e-9));
    }

    #[test]
    fn vga_setting_moves_only_adjustable_stage() {
        let mut chain = reference_chain();
        chain.vga_setting_db = -15.0;
        let c = cascade_analysis(&chain, chain.mid_band_hz()).unwrap();
        assert!(close(c.gain_db, 39.75, 1e-9), "gain {}", c.gain_db);
        // Friis NF does not depend on the last stage's own gain.
        assert!(close(c.nf_db, 2.5355077813745215, 1e-9));
        chain.vga_setting_db = 20.0;
        assert!(chain.validate().is_err(), "setting outside range must be rejected");
    }

    #[test]
    fn balun_appends_passive_loss() {
        let chain = reference_chain().with_balun();
        let c = cascade_analysis(&chain, chain.mid_band_hz()).unwrap();
        assert!(close(c.gain_db, 68.75, 1e-9));
        // A trailing 1 dB passive barely moves the cascade NF.
        assert!(close(c.nf_db, 2.5355, 1e-3));
    }

    #[test]
    fn passive_stage_nf_must_match_loss() {
        let bad = ComponentSpec::flat("pad", -3.0, 1.0, None);
        assert!(bad.validate().is_err());
        let good = ComponentSpec::flat("pad", -3.0, 3.0, None);
        assert!(good.validate().is_ok());
    }

    #[test]
    fn zero_linear_gain_rejected() {
        let chain = ChainSpec {
            stages: vec![ComponentSpec::flat("dead", f64::NEG_INFINITY, 0.0, None)],
            vga_setting_db: 0.0,
            if_band_hz: (0.15e9, 1.0e9),
        };
        assert!(cascade_analysis(&chain, 0.5e9).is_err());
    }

    #[test]
    fn oip3_bounded_by_best_stage() {
        let chain = reference_chain();
        let stages = chain.resolve(chain.mid_band_hz()).unwrap();
        let c = cascade_analysis(&chain, chain.mid_band_hz()).unwrap();
        let bound = stages
            .iter()
            .enumerate()
            .filter_map(|(i, s)| {
                s.oip3_dbm.map(|o| o + stages[i + 1..].iter().map(|t| t.gain_db).sum::<f64>())
            })
            .fold(f64::INFINITY, f64::min);
        assert!(c.oip3_dbm.unwrap() <= bound + 1e-9);
    }

    #[test]
    fn sensitivity_reference_points() {
        // 1 Hz, NF 0, SNR 0: the per-Hz floor constant.
        let s = sensitivity_dbm(0.0, 1.0, 0.0).unwrap();
        assert!(close(s, -173.98, 1e-12));
        // 800 MHz, NF 5.8, SNR 23.2.
        let s = sensitivity_dbm(5.8, 800e6, 23.2).unwrap();
        assert!(close(s, -55.94910013008055, 1e-9), "sensitivity {s}");
        // Single 1.65 MHz subcarrier at its own (full-band-referenced) SNR.
        let p1 = OfdmParams { n_data: 1, ..OfdmParams::default() };
        let snr1 = required_snr_db(&p1, 17.8).unwrap();
        let s = sensitivity_dbm(2.5, 1.65e6, snr1).unwrap();
        assert!(close(s, -111.32787288825659, 1e-9), "single-carrier sensitivity {s}");
    }

    #[test]
    fn budget_report_reference_pass() {
        let r =
            budget_report(&reference_chain(), &OfdmParams::default(), &LinkRequirement::default())
                .unwrap();
        assert!(r.nf_pass && r.gain_pass && r.pass);
        assert!(close(r.data_rate_bps, 2.9568e9, 1.0));
        assert!(close(r.cascade_mid.gain_db, 69.75, 1e-9));
        // Display renders without panicking and mentions the verdict.
        let text = r.to_string();
        assert!(text.contains("pass"), "{text}");
    }

    #[test]
    fn budget_report_fails_tight_requirements() {
        let req = LinkRequirement { nf_max_db: 2.0, ..LinkRequirement::default() };
        let r = budget_report(&reference_chain(), &OfdmParams::default(), &req).unwrap();
        assert!(!r.nf_pass && !r.pass);
        let mut chain = reference_chain();
        chain.vga_setting_db = -15.0; // 39.75 dB < 55 dB minimum
        let r = budget_report(&chain, &OfdmParams::default(), &LinkRequirement::default()).unwrap();
        assert!(!r.gain_pass && !r.pass);
        assert!(close(r.cascade_mid.gain_db, 39.75, 1e-9));
    }

    #[test]
    fn gain_spec_json_shapes() {
        let flat: GainSpec = serde_json::from_str("19.0").unwrap();
        assert_eq!(flat, GainSpec::Flat(19.0));
        let sloped: GainSpec = serde_json::from_str("[31.5, 24.0]").unwrap();
        assert_eq!(sloped, GainSpec::Sloped([31.5, 24.0]));
        let adj: GainSpec = serde_json::from_str(r#"{"min_db": -15.0, "max_db": 15.0}"#).unwrap();
        assert_eq!(adj, GainSpec::Adjustable { min_db: -15.0, max_db: 15.0 });
        let chain = reference_chain();
        let json = serde_json::to_string(&chain).unwrap();
        let back: ChainSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(chain, back);
    }
}
