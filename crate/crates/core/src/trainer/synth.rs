//! Synthetic speakers: each speaker is a fixed random gain curve over the 40
//! mel bands, and each utterance is white noise shaped by that curve plus a
//! small per-utterance perturbation and a slow loudness envelope.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Manifest, ManifestEntry};
use crate::features::{extract, hz_to_mel, write_wav, AudioSignal, MelFilterbank, SAMPLE_RATE};
use crate::numerics::Rng;
use crate::scoring::cosine;
use crate::{Error, Result, N_MELS};

const TEMPLATE_DB: f64 = 20.0;
const JITTER_DB: f64 = 2.0;
const ENVELOPE_BLOCK: usize = 4000;
const PEAK: f64 = 0.7;

#[derive(Debug, Clone)]
pub struct SynthReport {
    /// Every utterance.
    pub manifest: Manifest,
    /// First `utts - utts/2` utterances of each speaker.
    pub train: Manifest,
    /// Last `utts/2` utterances of each speaker.
    pub heldout: Manifest,
    /// Lowest same-speaker cosine between per-band mean log-mel profiles.
    pub within_min: Option<f64>,
    pub within_mean: Option<f64>,
    pub across_mean: Option<f64>,
}

fn gain_curve(band_db: &[f64], centers_mel: &[f64], n_fft: usize) -> Vec<f64> {
    let half = n_fft / 2;
    (0..=half)
        .map(|k| {
            let mel = hz_to_mel(k as f64 * f64::from(SAMPLE_RATE) / n_fft as f64);
            let db = match centers_mel.iter().position(|&c| c >= mel) {
                Some(0) => band_db[0],
                None => band_db[band_db.len() - 1],
                Some(i) => {
                    let t = (mel - centers_mel[i - 1]) / (centers_mel[i] - centers_mel[i - 1]);
                    band_db[i - 1] * (1.0 - t) + band_db[i] * t
                }
            };
            10f64.powf(db / 20.0)
        })
        .collect()
}

fn synth_utterance(template_db: &[f64], centers_mel: &[f64], n: usize, rng: &mut Rng) -> Vec<f64> {
    let band_db: Vec<f64> = template_db
        .iter()
        .map(|g| g + rng.random_range(-JITTER_DB..=JITTER_DB))
        .collect();
    let gains = gain_curve(&band_db, centers_mel, n);

    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.random_range(-1.0..1.0), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k } else { n - k };
        *c *= gains[bin];
    }
    planner.plan_fft_inverse(n).process(&mut buf);

    let blocks = n.div_ceil(ENVELOPE_BLOCK) + 1;
    let levels: Vec<f64> = (0..blocks).map(|_| rng.random_range(0.4..1.0)).collect();
    let mut out: Vec<f64> = buf
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let pos = i as f64 / ENVELOPE_BLOCK as f64;
            let b = pos.floor() as usize;
            let t = pos - b as f64;
            c.re * (levels[b] * (1.0 - t) + levels[b + 1] * t)
        })
        .collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= PEAK / peak);
    }
    // quantize exactly as the WAV writer will
    out.iter_mut()
        .for_each(|v| *v = (*v * 32768.0).round().clamp(-32768.0, 32767.0) / 32768.0);
    out
}

fn mean_profile(samples: &[f64]) -> Result<Vec<f64>> {
    let feats = extract(&AudioSignal::new(samples.to_vec()))?;
    let frames = feats.frame_count() as f64;
    Ok(feats
        .values()
        .rows()
        .into_iter()
        .map(|r| r.sum() / frames)
        .collect())
}

/// Writes `n_speakers × utts` WAV files plus `manifest.jsonl`, `train.jsonl`
/// and `heldout.jsonl` under `out_dir`, then checks that same-speaker
/// utterances have more similar mean log-mel profiles than cross-speaker ones.
pub fn synth_dataset(
    out_dir: impl AsRef<Path>,
    n_speakers: usize,
    utts: usize,
    seconds: f64,
    rng: &mut Rng,
) -> Result<SynthReport> {
    let out_dir = out_dir.as_ref();
    if n_speakers == 0 || utts == 0 {
        return Err(Error::InvalidDimension(
            "speaker and utterance counts must be >= 1".into(),
        ));
    }
    let n = (seconds * f64::from(SAMPLE_RATE)).round() as usize;
    if seconds.is_nan() || seconds <= 0.0 || n < crate::features::WINDOW_LEN {
        return Err(Error::InvalidDimension(format!(
            "duration {seconds} s is too short"
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let bank = MelFilterbank::new();
    let centers_mel: Vec<f64> = (0..N_MELS).map(|k| hz_to_mel(bank.center_hz(k))).collect();
    let heldout_count = utts / 2;

    let mut all = Vec::new();
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    let mut profiles: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_speakers);
    for s in 0..n_speakers {
        let speaker = format!("spk{s:03}");
        let template: Vec<f64> = (0..N_MELS)
            .map(|_| rng.random_range(-TEMPLATE_DB..=TEMPLATE_DB))
            .collect();
        let dir = out_dir.join(&speaker);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut speaker_profiles = Vec::with_capacity(utts);
        for u in 0..utts {
            let samples = synth_utterance(&template, &centers_mel, n, rng);
            let rel = PathBuf::from(&speaker).join(format!("utt{u:03}.wav"));
            write_wav(out_dir.join(&rel), &samples)?;
            speaker_profiles.push(mean_profile(&samples)?);
            let entry = ManifestEntry {
                speaker: speaker.clone(),
                path: rel,
            };
            if u < utts - heldout_count {
                train.push(entry.clone());
            } else {
                heldout.push(entry.clone());
            }
            all.push(entry);
        }
        profiles.push(speaker_profiles);
    }

    let (mut within, mut across) = (Vec::new(), Vec::new());
    let flat: Vec<(usize, &Vec<f64>)> = profiles
        .iter()
        .enumerate()
        .flat_map(|(s, ps)| ps.iter().map(move |p| (s, p)))
        .collect();
    for (i, (sa, a)) in flat.iter().enumerate() {
        for (sb, b) in &flat[i + 1..] {
            let c = cosine(
                ndarray::ArrayView1::from(a.as_slice()),
                ndarray::ArrayView1::from(b.as_slice()),
            );
            if sa == sb {
                within.push(c);
            } else {
                across.push(c);
            }
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let report = SynthReport {
        manifest: Manifest::new(all)?,
        train: Manifest::new(train)?,
        heldout: Manifest::new(heldout)?,
        within_min: within.iter().copied().reduce(f64::min),
        within_mean: mean(&within),
        across_mean: mean(&across),
    };
    if let Some(min) = report.within_min {
        if min <= 0.9 {
            return Err(Error::SynthCheck(format!(
                "same-speaker profile cosine {min:.4} <= 0.9"
            )));
        }
    }
    if let (Some(w), Some(a)) = (report.within_mean, report.across_mean) {
        if w <= a {
            return Err(Error::SynthCheck(format!(
                "mean same-speaker cosine {w:.4} <= cross-speaker {a:.4}"
            )));
        }
    }
    for (name, m) in [
        ("manifest.jsonl", &report.manifest),
        ("train.jsonl", &report.train),
        ("heldout.jsonl", &report.heldout),
    ] {
        m.save(out_dir.join(name))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_from_seed;

    #[test]
    fn gain_curve_hits_band_values_at_centers() {
        let bank = MelFilterbank::new();
        let centers: Vec<f64> = (0..N_MELS).map(|k| hz_to_mel(bank.center_hz(k))).collect();
        let db: Vec<f64> = (0..N_MELS).map(|k| k as f64).collect();
        let g = gain_curve(&db, &centers, 512);
        assert_eq!(g.len(), 257);
        assert_eq!(g[0], 1.0);
        assert!((g[256] - 10f64.powf(39.0 / 20.0)).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn counts_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let report = synth_dataset(dir.path(), 3, 5, 0.5, &mut rng_from_seed(2)).unwrap();
        assert_eq!(report.manifest.len(), 15);
        assert_eq!(report.train.len(), 9);
        assert_eq!(report.heldout.len(), 6);
        let text = std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 15);
        assert!(dir.path().join("spk002/utt004.wav").exists());
        assert!(report.within_min.unwrap() > 0.9);
        assert!(report.within_mean.unwrap() > report.across_mean.unwrap());
    }

    #[test]
    fn rejects_empty_counts() {
        let dir = tempfile::tempdir().unwrap();
        assert!(synth_dataset(dir.path(), 0, 2, 1.0, &mut rng_from_seed(0)).is_err());
        assert!(synth_dataset(dir.path(), 2, 2, 0.01, &mut rng_from_seed(0)).is_err());
    }
}
