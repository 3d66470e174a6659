//! Capture files: interleaved little-endian `f32` I/Q pairs plus a JSON
//! sidecar (`<name>.json`) carrying the sample rate, center frequency, and
//! length so a capture round-trips without out-of-band knowledge.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::IqStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqSidecar {
    pub sample_rate_hz: f64,
    pub center_freq_hz: f64,
    pub length: usize,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".json");
    std::path::PathBuf::from(name)
}

pub fn write_iq_binary(path: &Path, stream: &IqStream) -> Result<()> {
    let mut bytes = Vec::with_capacity(stream.samples.len() * 8);
    for s in &stream.samples {
        bytes.extend_from_slice(&(s.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    let sidecar = IqSidecar {
        sample_rate_hz: stream.sample_rate_hz,
        center_freq_hz: stream.center_freq_hz,
        length: stream.samples.len(),
    };
    let text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Config(format!("sidecar encode: {e}")))?;
    fs::write(sidecar_path(path), text)?;
    Ok(())
}

pub fn read_iq_binary(path: &Path) -> Result<IqStream> {
    let text = fs::read_to_string(sidecar_path(path))?;
    let sidecar: IqSidecar =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("sidecar decode: {e}")))?;
    let bytes = fs::read(path)?;
    if bytes.len() != sidecar.length * 8 {
        return Err(Error::Config(format!(
            "{} holds {} bytes but the sidecar declares {} samples",
            path.display(),
            bytes.len(),
            sidecar.length
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
            Complex64::new(re, im)
        })
        .collect();
    IqStream::new(samples, sidecar.sample_rate_hz, sidecar.center_freq_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::make_tone;

    #[test]
    fn capture_roundtrip_preserves_metadata_and_f32_samples() {
        let dir = std::env::temp_dir().join("beamrx-io-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tone.iq");
        let tone = make_tone(10.0e6, 100.0e6, -20.0, 0.3, 257).unwrap();
        let stream = IqStream::new(tone.samples.clone(), 100.0e6, 28.2e9).unwrap();
        write_iq_binary(&path, &stream).unwrap();
        let back = read_iq_binary(&path).unwrap();
        assert_eq!(back.samples.len(), 257);
        assert_eq!(back.sample_rate_hz, 100.0e6);
        assert_eq!(back.center_freq_hz, 28.2e9);
        for (a, b) in stream.samples.iter().zip(&back.samples) {
            assert_eq!(a.re as f32, b.re as f32);
            assert_eq!(a.im as f32, b.im as f32);
        }
        fs::remove_file(&path).ok();
        fs::remove_file(sidecar_path(&path)).ok();
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = std::env::temp_dir().join("beamrx-io-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("short.iq");
        let tone = make_tone(1.0e6, 10.0e6, -10.0, 0.0, 64).unwrap();
        write_iq_binary(&path, &tone).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(read_iq_binary(&path).is_err());
        fs::remove_file(&path).ok();
        fs::remove_file(sidecar_path(&path)).ok();
    }
}
