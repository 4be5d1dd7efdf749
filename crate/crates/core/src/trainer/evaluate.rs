use log::warn;

use super::{FeaturePool, Manifest};
use crate::attention::{AttentionMode, Embedding};
use crate::metrics::{MetricsReport, TrialScoreSet};
use crate::model::embed;
use crate::numerics::ParameterStore;
use crate::scoring::{centroid, score};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub scores: TrialScoreSet,
    pub report: MetricsReport,
    /// Speakers that contributed trials.
    pub speakers: Vec<String>,
}

/// Enrolls each speaker on the first half of their utterances (sorted by
/// path, at least one) and scores every remaining utterance against every
/// enrolled centroid. Same-speaker pairs are targets.
pub fn evaluate_pool(
    pool: &FeaturePool,
    params: &ParameterStore,
    mode: AttentionMode,
) -> Result<Evaluation> {
    let mut centroids: Vec<(usize, Embedding)> = Vec::new();
    let mut tests: Vec<(usize, Embedding)> = Vec::new();
    let mut speakers = Vec::new();
    for spk in &pool.speakers {
        if spk.utterances.len() < 2 {
            warn!(
                "skipping speaker {}: {} utterance(s), need at least 2",
                spk.speaker,
                spk.utterances.len()
            );
            continue;
        }
        let idx = speakers.len();
        speakers.push(spk.speaker.clone());
        let enroll = (spk.utterances.len() / 2).max(1);
        let embeddings = spk
            .utterances
            .iter()
            .map(|(_, f)| embed(f, params, mode))
            .collect::<Result<Vec<_>>>()?;
        centroids.push((idx, centroid(&embeddings[..enroll])?));
        tests.extend(embeddings.into_iter().skip(enroll).map(|e| (idx, e)));
    }
    if speakers.len() < 2 {
        return Err(Error::Empty(
            "trial set (need two speakers with 2+ utterances)",
        ));
    }

    let mut scores = TrialScoreSet::default();
    for (test_spk, e) in &tests {
        for (enrolled_spk, c) in &centroids {
            let s = score(params, e, c);
            if test_spk == enrolled_spk {
                scores.target.push(s);
            } else {
                scores.impostor.push(s);
            }
        }
    }
    let report = MetricsReport::compute(&scores)?;
    Ok(Evaluation {
        scores,
        report,
        speakers,
    })
}

pub fn evaluate(
    manifest: &Manifest,
    params: &ParameterStore,
    mode: AttentionMode,
) -> Result<Evaluation> {
    evaluate_pool(&FeaturePool::from_manifest(manifest)?, params, mode)
}
