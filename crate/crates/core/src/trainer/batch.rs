use std::path::PathBuf;

use rand::seq::index::sample;
use rand::Rng as _;

use super::{Manifest, TrainConfig};
use crate::features::{crop_segment, featurize_wav, FeatureMatrix};
use crate::numerics::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SpeakerFeatures {
    pub speaker: String,
    pub utterances: Vec<(PathBuf, FeatureMatrix)>,
}

/// Featurized utterances grouped by speaker (speakers and paths sorted).
#[derive(Debug, Clone, Default)]
pub struct FeaturePool {
    pub speakers: Vec<SpeakerFeatures>,
}

impl FeaturePool {
    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        let speakers = manifest
            .by_speaker()
            .into_iter()
            .map(|(speaker, paths)| {
                let utterances = paths
                    .into_iter()
                    .map(|p| featurize_wav(p).map(|f| (p.to_path_buf(), f)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(SpeakerFeatures {
                    speaker: speaker.to_string(),
                    utterances,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { speakers })
    }
}

/// `N·M` crops laid out speaker-major.
#[derive(Debug, Clone)]
pub struct Batch {
    pub crops: Vec<FeatureMatrix>,
    pub speakers: Vec<String>,
    /// `(speaker index, utterance index, crop start)` for each crop.
    pub sources: Vec<(usize, usize, usize)>,
}

/// Samples `N` speakers without replacement and `M` utterances from each
/// (with replacement only when a speaker has fewer than `M` usable ones),
/// then crops each to `L` frames at a uniform random offset.
pub fn assemble_batch(pool: &FeaturePool, cfg: &TrainConfig, rng: &mut Rng) -> Result<Batch> {
    let len = cfg.crop_frames;
    let usable: Vec<(usize, Vec<usize>)> = pool
        .speakers
        .iter()
        .enumerate()
        .filter_map(|(s, spk)| {
            let ok: Vec<usize> = spk
                .utterances
                .iter()
                .enumerate()
                .filter(|(_, (_, f))| f.frame_count() >= len)
                .map(|(i, _)| i)
                .collect();
            (!ok.is_empty()).then_some((s, ok))
        })
        .collect();
    let n = cfg.speakers_per_batch;
    let m = cfg.utterances_per_speaker;
    if usable.len() < n {
        return Err(Error::NotEnoughSpeakers {
            needed: n,
            available: usable.len(),
        });
    }

    let mut batch = Batch {
        crops: Vec::with_capacity(n * m),
        speakers: Vec::with_capacity(n),
        sources: Vec::with_capacity(n * m),
    };
    for pick in sample(rng, usable.len(), n).into_iter() {
        let (s, utts) = &usable[pick];
        let chosen: Vec<usize> = if utts.len() >= m {
            sample(rng, utts.len(), m)
                .into_iter()
                .map(|k| utts[k])
                .collect()
        } else {
            (0..m)
                .map(|_| utts[rng.random_range(0..utts.len())])
                .collect()
        };
        batch.speakers.push(pool.speakers[*s].speaker.clone());
        for u in chosen {
            let features = &pool.speakers[*s].utterances[u].1;
            let start = rng.random_range(0..=features.frame_count() - len);
            batch.crops.push(crop_segment(features, len, start)?);
            batch.sources.push((*s, u, start));
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_from_seed;
    use ndarray::Array2;

    fn pool(utts_per_speaker: &[usize], frames: usize) -> FeaturePool {
        FeaturePool {
            speakers: utts_per_speaker
                .iter()
                .enumerate()
                .map(|(s, &count)| SpeakerFeatures {
                    speaker: format!("s{s}"),
                    utterances: (0..count)
                        .map(|u| {
                            let values = Array2::from_shape_fn((40, frames), |(r, c)| {
                                (s * 1_000_000 + u * 10_000 + r * 1000 + c) as f64
                            });
                            (
                                PathBuf::from(format!("{s}/{u}.wav")),
                                FeatureMatrix::new(values).unwrap(),
                            )
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    fn cfg(n: usize, m: usize, l: usize) -> TrainConfig {
        TrainConfig {
            speakers_per_batch: n,
            utterances_per_speaker: m,
            crop_frames: l,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn exact_fit() {
        let b = assemble_batch(&pool(&[2, 2], 100), &cfg(2, 2, 60), &mut rng_from_seed(0)).unwrap();
        assert_eq!(b.crops.len(), 4);
        assert!(b.crops.iter().all(|c| c.frame_count() == 60));
        let mut spk = b.speakers.clone();
        spk.sort();
        assert_eq!(spk, vec!["s0", "s1"]);
        // without replacement: both utterances of each speaker appear
        for j in 0..2 {
            let mut u: Vec<_> = b.sources[j * 2..j * 2 + 2].iter().map(|s| s.1).collect();
            u.sort();
            assert_eq!(u, vec![0, 1]);
        }
    }

    #[test]
    fn crops_match_sources() {
        let p = pool(&[3, 3, 3], 80);
        let b = assemble_batch(&p, &cfg(3, 2, 20), &mut rng_from_seed(5)).unwrap();
        for (crop, &(s, u, start)) in b.crops.iter().zip(&b.sources) {
            let full = &p.speakers[s].utterances[u].1;
            assert_eq!(crop.values()[[3, 0]], full.values()[[3, start]]);
        }
    }

    #[test]
    fn singleton_speaker_is_resampled() {
        let p = pool(&[1, 4], 200);
        let b = assemble_batch(&p, &cfg(2, 4, 60), &mut rng_from_seed(3)).unwrap();
        let idx = b.speakers.iter().position(|s| s == "s0").unwrap();
        let sources = &b.sources[idx * 4..idx * 4 + 4];
        assert!(sources.iter().all(|s| s.0 == 0 && s.1 == 0));
        let starts: std::collections::HashSet<_> = sources.iter().map(|s| s.2).collect();
        assert!(starts.len() > 1);
    }

    #[test]
    fn too_few_speakers() {
        let err =
            assemble_batch(&pool(&[2; 5], 100), &cfg(8, 2, 60), &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(
            err,
            Error::NotEnoughSpeakers {
                needed: 8,
                available: 5
            }
        ));
        // speakers whose utterances are all shorter than the crop do not count
        let err =
            assemble_batch(&pool(&[2, 2], 50), &cfg(2, 2, 60), &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(
            err,
            Error::NotEnoughSpeakers {
                needed: 2,
                available: 0
            }
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let p = pool(&[3, 3, 3, 3], 90);
        let a = assemble_batch(&p, &cfg(3, 2, 30), &mut rng_from_seed(9)).unwrap();
        let b = assemble_batch(&p, &cfg(3, 2, 30), &mut rng_from_seed(9)).unwrap();
        assert_eq!(a.sources, b.sources);
    }
}
