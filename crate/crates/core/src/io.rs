//! WAV, JSON and JSON-lines helpers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CassError, Result};

/// Decoded audio, one vector per channel, samples scaled to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wav {
    pub sample_rate: f64,
    pub channels: Vec<Vec<f64>>,
}

impl Wav {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Channel average.
    pub fn mono(&self) -> Vec<f64> {
        let n = self.channels.len() as f64;
        (0..self.len())
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / n)
            .collect()
    }
}

pub fn read_wav(path: &Path) -> Result<Wav> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => CassError::io(path, io),
        other => CassError::Wav(other),
    })?;
    let spec = reader.spec();
    let nch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / nch.max(1)); nch];
    for frame in interleaved.chunks_exact(nch) {
        for (c, &s) in frame.iter().enumerate() {
            channels[c].push(s);
        }
    }
    Ok(Wav {
        sample_rate: f64::from(spec.sample_rate),
        channels,
    })
}

/// Writes 32-bit float WAV.
pub fn write_wav(path: &Path, sample_rate: f64, channels: &[Vec<f64>]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate: sample_rate.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let len = channels.first().map_or(0, Vec::len);
    if channels.iter().any(|c| c.len() != len) {
        return Err(CassError::LengthMismatch("WAV channels differ in length".into()));
    }
    let mut writer = hound::WavWriter::create(path, spec)?;
    for i in 0..len {
        for c in channels {
            writer.write_sample(c[i] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| CassError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| CassError::io(path, e))?;
    w.flush().map_err(|e| CassError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    if !path.exists() {
        return Err(CassError::MissingArtifact {
            path: path.to_path_buf(),
            hint: format!("{what} not found"),
        });
    }
    let file = File::open(path).map_err(|e| CassError::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Writes one compact JSON document per line.
pub fn write_json_lines<T: Serialize>(mut out: impl Write, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| CassError::io("<json lines>", e))?;
    }
    Ok(())
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configuration serialises");
    hex::encode(Sha256::digest(&json))
}
