//! Log-mel front end: 16 kHz mono PCM to 40×T log filterbank energies.
//!
//! Framing is 25 ms windows (400 samples) with a 10 ms hop (160 samples).
//! Each frame is Hamming-windowed, zero-padded to a 512-point DFT, and its
//! power spectrum is pooled by 40 triangular filters spaced on the HTK mel
//! scale between 0 Hz and Nyquist. Energies are floored at `1e-10` before
//! the natural log. There is no pre-emphasis and no mean normalization.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result, N_MELS};

pub const SAMPLE_RATE: u32 = 16_000;
pub const WINDOW_LEN: usize = 400;
pub const HOP_LEN: usize = 160;
pub const FFT_LEN: usize = 512;
pub const N_BINS: usize = FFT_LEN / 2 + 1;
pub const ENERGY_FLOOR: f64 = 1e-10;

/// Smallest crop the encoder can consume.
pub const MIN_CROP: usize = 15;

const FEATURE_MAGIC: &[u8; 4] = b"SASF";

/// Mono audio with samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Reads a 16-bit PCM mono 16 kHz WAV file. Nothing is resampled or mixed down.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(BufReader::new(file)).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedChannels(spec.channels));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedSampleRate(spec.sample_rate));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Wav {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    if samples.is_empty() {
        return Err(Error::Empty("wav payload"));
    }
    Ok(AudioSignal::new(samples))
}

/// Writes samples as 16-bit PCM mono 16 kHz, clamping to the representable range.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |e: hound::Error| Error::Wav {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &x in samples {
        let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

pub fn frame_count(n_samples: usize) -> usize {
    if n_samples < WINDOW_LEN {
        0
    } else {
        1 + (n_samples - WINDOW_LEN) / HOP_LEN
    }
}

/// Symmetric Hamming window of length [`WINDOW_LEN`].
pub fn hamming_window() -> Vec<f64> {
    let denom = (WINDOW_LEN - 1) as f64;
    (0..WINDOW_LEN)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
        .collect()
}

/// Slices the signal into Hamming-windowed frames, one per row (`frames × 400`).
pub fn frame_signal(signal: &AudioSignal) -> Result<Array2<f64>> {
    let n = frame_count(signal.len());
    if n == 0 {
        return Err(Error::UtteranceTooShort {
            samples: signal.len(),
            window: WINDOW_LEN,
        });
    }
    let window = hamming_window();
    let mut frames = Array2::zeros((n, WINDOW_LEN));
    for (i, mut row) in frames.rows_mut().into_iter().enumerate() {
        let chunk = &signal.samples[i * HOP_LEN..i * HOP_LEN + WINDOW_LEN];
        for ((dst, &x), &w) in row.iter_mut().zip(chunk).zip(&window) {
            *dst = x * w;
        }
    }
    Ok(frames)
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over the one-sided power spectrum.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// `N_MELS × N_BINS`, unnormalized triangles peaking at 1.
    weights: Array2<f64>,
    edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new() -> Self {
        let nyquist = f64::from(SAMPLE_RATE) / 2.0;
        let top = hz_to_mel(nyquist);
        let edges_hz: Vec<f64> = (0..N_MELS + 2)
            .map(|i| mel_to_hz(top * i as f64 / (N_MELS + 1) as f64))
            .collect();
        let bin_hz = f64::from(SAMPLE_RATE) / FFT_LEN as f64;
        let mut weights = Array2::zeros((N_MELS, N_BINS));
        for m in 0..N_MELS {
            let (lo, mid, hi) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            for b in 0..N_BINS {
                let f = b as f64 * bin_hz;
                let w = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                weights[[m, b]] = w;
            }
        }
        Self { weights, edges_hz }
    }

    /// Peak frequency of filter `k`.
    pub fn center_hz(&self, k: usize) -> f64 {
        self.edges_hz[k + 1]
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }
}

impl Default for MelFilterbank {
    fn default() -> Self {
        Self::new()
    }
}

/// A `40×T` matrix of log-mel energies; column `t` is frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() != N_MELS {
            return Err(Error::InvalidDimension(format!(
                "feature matrix has {} rows, expected {N_MELS}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::Empty("feature matrix"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDimension("non-finite feature value".into()));
        }
        Ok(Self { values })
    }

    pub fn frame_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Reusable DFT plan plus filterbank.
pub struct LogMel {
    fft: Arc<dyn Fft<f64>>,
    bank: MelFilterbank,
}

impl LogMel {
    pub fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(FFT_LEN);
        Self {
            fft,
            bank: MelFilterbank::new(),
        }
    }

    /// Maps windowed frames (`frames × 400`) to a `40 × frames` log-mel matrix.
    pub fn compute(&self, frames: ArrayView2<'_, f64>) -> Result<FeatureMatrix> {
        if frames.ncols() != WINDOW_LEN || frames.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "expected frames × {WINDOW_LEN}, got {:?}",
                frames.dim()
            )));
        }
        let mut out = Array2::zeros((N_MELS, frames.nrows()));
        let mut buf = vec![Complex::new(0.0, 0.0); FFT_LEN];
        let mut power = vec![0.0; N_BINS];
        for (t, frame) in frames.rows().into_iter().enumerate() {
            for (dst, &x) in buf.iter_mut().zip(frame.iter()) {
                *dst = Complex::new(x, 0.0);
            }
            buf[WINDOW_LEN..].fill(Complex::new(0.0, 0.0));
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for m in 0..N_MELS {
                let energy: f64 = self
                    .bank
                    .weights
                    .row(m)
                    .iter()
                    .zip(&power)
                    .map(|(w, p)| w * p)
                    .sum();
                out[[m, t]] = energy.max(ENERGY_FLOOR).ln();
            }
        }
        FeatureMatrix::new(out)
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.bank
    }
}

impl Default for LogMel {
    fn default() -> Self {
        Self::new()
    }
}

pub fn log_mel(frames: ArrayView2<'_, f64>) -> Result<FeatureMatrix> {
    LogMel::new().compute(frames)
}

/// Full front end for one signal.
pub fn extract(signal: &AudioSignal) -> Result<FeatureMatrix> {
    let frames = frame_signal(signal)?;
    log_mel(frames.view())
}

pub fn featurize_wav(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    extract(&load_wav(path)?)
}

/// Contiguous `40×len` slice starting at frame `start`.
pub fn crop_segment(features: &FeatureMatrix, len: usize, start: usize) -> Result<FeatureMatrix> {
    let frames = features.frame_count();
    if len < MIN_CROP {
        return Err(Error::InvalidDimension(format!(
            "crop length {len} below receptive field {MIN_CROP}"
        )));
    }
    if start + len > frames {
        return Err(Error::CropOutOfRange {
            frames,
            crop: len,
            start,
        });
    }
    Ok(FeatureMatrix {
        values: features.values.slice(s![.., start..start + len]).to_owned(),
    })
}

/// Writes the `SASF` cache: magic, u32 LE frame count, then column-major f64 LE.
pub fn write_feature_cache(path: impl AsRef<Path>, features: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let frames = u32::try_from(features.frame_count())
        .map_err(|_| Error::FeatureCache("too many frames".into()))?;
    let mut bytes = Vec::with_capacity(8 + 8 * N_MELS * features.frame_count());
    bytes.extend_from_slice(FEATURE_MAGIC);
    bytes.extend_from_slice(&frames.to_le_bytes());
    for col in features.values.columns() {
        for v in col {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_cache(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::FeatureCache("bad magic".into()));
    }
    let frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let payload = &bytes[8..];
    if payload.len() != 8 * N_MELS * frames {
        return Err(Error::FeatureCache(format!(
            "expected {} payload bytes for {frames} frames, found {}",
            8 * N_MELS * frames,
            payload.len()
        )));
    }
    let mut values = Array2::zeros((N_MELS, frames));
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        values[[i % N_MELS, i / N_MELS]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    FeatureMatrix::new(values)
}
