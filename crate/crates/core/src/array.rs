//! Uniform linear array geometry, steering, amplitude tapers and far-field
//! patterns.
//!
//! Element spacing is fixed in metres at the design frequency
//! (`spacing_wavelengths · λ_design`), so at another carrier the electrical
//! spacing scales by `freq / design_freq`. Patterns are power patterns in dB,
//! peak-normalized to 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_STEP_DEG: f64 = 0.05;

/// Pattern floor for zero-power points, matching the usual log-plot clamp.
const PATTERN_FLOOR_DB: f64 = -300.0;

/// Refined peaks within this many dB of the global maximum are replicas of
/// the main lobe (grating lobes) and never counted as sidelobes.
const GRATING_TIE_DB: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayGeometry {
    pub n_elements: usize,
    /// Element spacing in wavelengths at the design frequency.
    pub spacing_wavelengths: f64,
    pub design_freq_hz: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        // Four-element azimuth line-up at 28 GHz, 0.75 λ apart (8.0 mm).
        ArrayGeometry { n_elements: 4, spacing_wavelengths: 0.75, design_freq_hz: 28.0e9 }
    }
}

impl ArrayGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.n_elements == 0 {
            return Err(Error::invalid("array needs at least one element"));
        }
        if !(self.spacing_wavelengths > 0.0 && self.spacing_wavelengths.is_finite()) {
            return Err(Error::invalid("element spacing must be positive"));
        }
        if !(self.design_freq_hz > 0.0 && self.design_freq_hz.is_finite()) {
            return Err(Error::invalid("design frequency must be positive"));
        }
        Ok(())
    }

    /// Electrical spacing in wavelengths at `freq_hz` (metric spacing fixed).
    pub fn spacing_at(&self, freq_hz: f64) -> f64 {
        self.spacing_wavelengths * freq_hz / self.design_freq_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum TaperSpec {
    #[default]
    Uniform,
    /// Amplitude ramps linearly from 10^(pedestal/20) at the edges to 1.0 at
    /// the array centre. Even-length arrays sample the ramp either side of
    /// the centre, so their two middle elements sit just below 1.0.
    LinearPedestal { pedestal_db: f64 },
}

/// Optional per-element directivity applied on top of the array factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum ElementPattern {
    #[default]
    Isotropic,
    /// Amplitude = cos(θ)^exponent. The default exponent 1.3 is a stand-in
    /// fit for a patch sub-array's azimuth cut and is flagged as such in
    /// run metadata.
    CosinePower { exponent: f64 },
}

pub const DEFAULT_COSINE_EXPONENT: f64 = 1.3;

/// Amplitude gain of one element toward θ (broadside = 0°).
pub fn element_gain_amplitude(ep: &ElementPattern, theta_deg: f64) -> f64 {
    match ep {
        ElementPattern::Isotropic => 1.0,
        ElementPattern::CosinePower { exponent } => {
            theta_deg.to_radians().cos().max(0.0).powf(*exponent)
        }
    }
}

/// Steering vector toward θ at carrier `freq_hz`: element k gets phase
/// 2π · d_λ(freq) · k · sin θ.
pub fn steering_vector(g: &ArrayGeometry, theta_deg: f64, freq_hz: f64) -> Result<Vec<Complex64>> {
    g.validate()?;
    if !(freq_hz > 0.0 && freq_hz.is_finite()) {
        return Err(Error::invalid("carrier frequency must be positive"));
    }
    if !(-90.0..=90.0).contains(&theta_deg) {
        return Err(Error::invalid(format!("steer angle {theta_deg}° outside [-90°, 90°]")));
    }
    let d = g.spacing_at(freq_hz);
    let u = theta_deg.to_radians().sin();
    Ok((0..g.n_elements)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * d * k as f64 * u))
        .collect())
}

/// Per-element amplitudes for a taper, peak value 1.0 on the continuous ramp.
pub fn taper_amplitudes(n: usize, taper: &TaperSpec) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("taper needs at least one element"));
    }
    match *taper {
        TaperSpec::Uniform => Ok(vec![1.0; n]),
        TaperSpec::LinearPedestal { pedestal_db } => {
            if pedestal_db > 0.0 || !pedestal_db.is_finite() {
                return Err(Error::invalid(format!(
                    "pedestal must be a finite level <= 0 dB, got {pedestal_db}"
                )));
            }
            if n == 1 {
                return Ok(vec![1.0]);
            }
            let edge = 10f64.powf(pedestal_db / 20.0);
            let c = (n as f64 - 1.0) / 2.0;
            Ok((0..n).map(|k| edge + (1.0 - edge) * (1.0 - (k as f64 - c).abs() / c)).collect())
        }
    }
}

/// Power pattern over `grid_deg`, normalized to a 0 dB peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub angles_deg: Vec<f64>,
    pub magnitude_db: Vec<f64>,
}

impl Pattern {
    /// Normalizes linear powers to a 0 dB peak. An all-zero pattern keeps the
    /// −∞ floor on every point.
    pub fn from_power(angles_deg: Vec<f64>, power: Vec<f64>) -> Result<Pattern> {
        if angles_deg.len() != power.len() || angles_deg.is_empty() {
            return Err(Error::invalid("pattern needs matching, non-empty angle/power arrays"));
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("pattern grid must be strictly increasing"));
        }
        let peak = power.iter().cloned().fold(0.0f64, f64::max);
        if peak <= 0.0 {
            return Ok(Pattern { angles_deg, magnitude_db: vec![f64::NEG_INFINITY; power.len()] });
        }
        let magnitude_db = power
            .iter()
            .map(|&p| {
                if p <= 0.0 {
                    PATTERN_FLOOR_DB
                } else {
                    (10.0 * (p / peak).log10()).max(PATTERN_FLOOR_DB)
                }
            })
            .collect();
        Ok(Pattern { angles_deg, magnitude_db })
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    /// Grid point with the highest value (first on exact ties).
    pub fn peak(&self) -> (f64, f64) {
        let mut best = 0;
        for i in 1..self.magnitude_db.len() {
            if self.magnitude_db[i] > self.magnitude_db[best] {
                best = i;
            }
        }
        (self.angles_deg[best], self.magnitude_db[best])
    }

    /// Interior local maxima with three-point parabolic refinement of both
    /// position and value. Plateau points count once.
    pub fn local_maxima(&self) -> Vec<(f64, f64)> {
        let p = &self.magnitude_db;
        let mut out = Vec::new();
        for i in 1..p.len().saturating_sub(1) {
            if p[i] >= p[i - 1] && p[i] > p[i + 1] && p[i] > PATTERN_FLOOR_DB {
                out.push(refine_parabolic(&self.angles_deg, p, i));
            }
        }
        out
    }

    /// Highest refined sidelobe relative to the peak. The main lobe (the
    /// global peak's contiguous descent region) is excluded, as are grating
    /// replicas that tie the peak. None when no sidelobe exists.
    pub fn sidelobe_level_db(&self) -> Option<f64> {
        let p = &self.magnitude_db;
        if p.len() < 3 {
            return None;
        }
        let peak_idx = {
            let mut best = 0;
            for i in 1..p.len() {
                if p[i] > p[best] {
                    best = i;
                }
            }
            best
        };
        let mut lo = peak_idx;
        while lo > 0 && p[lo - 1] <= p[lo] {
            lo -= 1;
        }
        let mut hi = peak_idx;
        while hi + 1 < p.len() && p[hi + 1] <= p[hi] {
            hi += 1;
        }
        let step = self.angles_deg[1] - self.angles_deg[0];
        let mut best: Option<f64> = None;
        for (ang, val) in self.local_maxima() {
            let idx = ((ang - self.angles_deg[0]) / step).round() as usize;
            if (lo..=hi).contains(&idx) {
                continue;
            }
            if val >= p[peak_idx] - GRATING_TIE_DB {
                continue; // full-strength replica, not a sidelobe
            }
            if best.is_none_or(|b| val > b) {
                best = Some(val);
            }
        }
        best
    }

    /// −3 dB beamwidth around the global peak, linear interpolation at the
    /// crossings. Errors when either side never crosses −3 dB.
    pub fn beamwidth_3db_deg(&self) -> Result<f64> {
        let p = &self.magnitude_db;
        if p.len() < 3 {
            return Err(Error::Computation("pattern too short for a beamwidth".into()));
        }
        let peak_idx = {
            let mut best = 0;
            for i in 1..p.len() {
                if p[i] > p[best] {
                    best = i;
                }
            }
            best
        };
        let level = p[peak_idx] - 3.0;
        let cross = |dir: isize| -> Option<f64> {
            let mut i = peak_idx as isize;
            loop {
                let j = i + dir;
                if j < 0 || j >= p.len() as isize {
                    return None;
                }
                let (pi, pj) = (p[i as usize], p[j as usize]);
                if pj < level {
                    let t = (level - pi) / (pj - pi);
                    let (ai, aj) = (self.angles_deg[i as usize], self.angles_deg[j as usize]);
                    return Some(ai + t * (aj - ai));
                }
                i = j;
            }
        };
        match (cross(-1), cross(1)) {
            (Some(a), Some(b)) => Ok(b - a),
            _ => Err(Error::Computation(
                "pattern never crosses −3 dB on both sides of the peak".into(),
            )),
        }
    }

    /// `angle_deg,magnitude_db` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("angle_deg,magnitude_db\n");
        for (a, m) in self.angles_deg.iter().zip(&self.magnitude_db) {
            s.push_str(&format!("{a:.4},{m:.6}\n"));
        }
        s
    }
}

fn refine_parabolic(angles: &[f64], p: &[f64], i: usize) -> (f64, f64) {
    let (a, b, c) = (p[i - 1], p[i], p[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 || !den.is_finite() {
        return (angles[i], p[i]);
    }
    let delta = 0.5 * (a - c) / den;
    let step = angles[i] - angles[i - 1];
    (angles[i] + delta * step, b - 0.25 * (a - c) * delta)
}

/// Evenly spaced grid from `start` to `stop` inclusive (within rounding).
pub fn angle_grid(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg.is_finite()) || stop_deg < start_deg {
        return Err(Error::invalid(format!(
            "grid {start_deg}:{stop_deg}:{step_deg} is not a valid range"
        )));
    }
    let n = ((stop_deg - start_deg) / step_deg).round() as usize + 1;
    Ok((0..n).map(|i| start_deg + i as f64 * step_deg).collect())
}

pub fn default_grid() -> Vec<f64> {
    angle_grid(-90.0, 90.0, DEFAULT_GRID_STEP_DEG).expect("static grid")
}

/// |Σ_k a_k · w_k · e^{j2π d_λ k sinθ}|² over the grid, peak-normalized.
pub fn array_factor(
    g: &ArrayGeometry,
    amplitudes: &[f64],
    weights: &[Complex64],
    grid_deg: &[f64],
    freq_hz: f64,
) -> Result<Pattern> {
    g.validate()?;
    if amplitudes.len() != g.n_elements || weights.len() != g.n_elements {
        return Err(Error::invalid(format!(
            "need {} amplitudes and weights, got {} and {}",
            g.n_elements,
            amplitudes.len(),
            weights.len()
        )));
    }
    if grid_deg.len() < 2 {
        return Err(Error::invalid("pattern grid needs at least two points"));
    }
    let d = g.spacing_at(freq_hz);
    let power: Vec<f64> = grid_deg
        .iter()
        .map(|&theta| {
            let u = theta.to_radians().sin();
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..g.n_elements {
                let phase = 2.0 * std::f64::consts::PI * d * k as f64 * u;
                acc += amplitudes[k] * weights[k] * Complex64::from_polar(1.0, phase);
            }
            acc.norm_sqr()
        })
        .collect();
    Pattern::from_power(grid_deg.to_vec(), power)
}

/// Elevation cut of the 8-element series-fed sub-array: λ-spaced line with
/// equal phases and the given taper.
pub fn element_pattern_elevation(taper: &TaperSpec, grid_deg: &[f64]) -> Result<Pattern> {
    let g = ArrayGeometry { n_elements: 8, spacing_wavelengths: 1.0, design_freq_hz: 28.0e9 };
    let amps = taper_amplitudes(g.n_elements, taper)?;
    let weights = vec![Complex64::new(1.0, 0.0); g.n_elements];
    array_factor(&g, &amps, &weights, grid_deg, g.design_freq_hz)
}

/// Amplitude sum of the elevation sub-array at broadside; used as the fixed
/// scalar gain each azimuth channel sees from its sub-array feed.
pub fn elevation_broadside_amplitude(taper: &TaperSpec) -> Result<f64> {
    Ok(taper_amplitudes(8, taper)?.iter().sum())
}
