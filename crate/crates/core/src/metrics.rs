//! Verification metrics over labeled trial scores: EER, minDCF and ROC AUC.
//!
//! A trial is accepted when `score >= threshold`. Candidate thresholds are
//! `-inf`, the midpoints between consecutive distinct scores, and `+inf`, so
//! every achievable operating point is visited exactly once. All rates are in
//! `[0, 1]`; percentages only appear in user-facing output.

use std::fmt;
use std::path::Path;

use crate::{Error, Result};

pub const DEFAULT_P_TARGET: f64 = 0.01;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialScoreSet {
    pub target: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl TrialScoreSet {
    pub fn new(target: Vec<f64>, impostor: Vec<f64>) -> Self {
        Self { target, impostor }
    }

    pub fn len(&self) -> usize {
        self.target.len() + self.impostor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.target.is_empty() {
            return Err(Error::Empty("target scores"));
        }
        if self.impostor.is_empty() {
            return Err(Error::Empty("impostor scores"));
        }
        if self
            .target
            .iter()
            .chain(&self.impostor)
            .any(|s| !s.is_finite())
        {
            return Err(Error::InvalidDimension("non-finite trial score".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Fraction of impostors accepted.
    pub far: f64,
    /// Fraction of targets rejected.
    pub frr: f64,
}

impl RocPoint {
    pub fn tpr(&self) -> f64 {
        1.0 - self.frr
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Operating points in increasing threshold order (FAR and TPR non-increasing).
pub fn roc_points(scores: &TrialScoreSet) -> Result<Vec<RocPoint>> {
    scores.validate()?;
    let targets = sorted(&scores.target);
    let impostors = sorted(&scores.impostor);
    let mut all: Vec<f64> = targets.iter().chain(&impostors).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();

    let mut thresholds = Vec::with_capacity(all.len() + 1);
    thresholds.push(f64::NEG_INFINITY);
    thresholds.extend(all.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    thresholds.push(f64::INFINITY);

    let (nt, ni) = (targets.len() as f64, impostors.len() as f64);
    Ok(thresholds
        .into_iter()
        .map(|threshold| {
            let rejected_targets = targets.partition_point(|&s| s < threshold);
            let rejected_impostors = impostors.partition_point(|&s| s < threshold);
            RocPoint {
                threshold,
                far: (impostors.len() - rejected_impostors) as f64 / ni,
                frr: rejected_targets as f64 / nt,
            }
        })
        .collect())
}

/// EER and the threshold it was read at. Picks the point minimizing
/// `|FAR − FRR|`, breaking ties toward smaller `FAR + FRR`.
pub fn eer_with_threshold(scores: &TrialScoreSet) -> Result<(f64, f64)> {
    let points = roc_points(scores)?;
    let best = points
        .iter()
        .min_by(|a, b| {
            let ka = ((a.far - a.frr).abs(), a.far + a.frr);
            let kb = ((b.far - b.frr).abs(), b.far + b.frr);
            ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        })
        .expect("roc has at least two points");
    Ok(((best.far + best.frr) / 2.0, best.threshold))
}

pub fn eer(scores: &TrialScoreSet) -> Result<f64> {
    eer_with_threshold(scores).map(|(e, _)| e)
}

/// Minimum over thresholds of `p_target·FRR + (1 − p_target)·FAR`.
pub fn dcf(scores: &TrialScoreSet, p_target: f64) -> Result<f64> {
    Ok(roc_points(scores)?
        .iter()
        .map(|p| p_target * p.frr + (1.0 - p_target) * p.far)
        .fold(f64::INFINITY, f64::min))
}

/// Trapezoidal area under TPR as a function of FAR.
pub fn auc(scores: &TrialScoreSet) -> Result<f64> {
    let points = roc_points(scores)?;
    Ok(points
        .windows(2)
        .map(|w| (w[0].far - w[1].far) * (w[0].tpr() + w[1].tpr()) / 2.0)
        .sum())
}

/// Fraction of (target, impostor) pairs ranked correctly, ties counting half.
pub fn auc_pairwise_oracle(scores: &TrialScoreSet) -> Result<f64> {
    scores.validate()?;
    let mut wins = 0.0;
    for &t in &scores.target {
        for &i in &scores.impostor {
            if t > i {
                wins += 1.0;
            } else if t == i {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (scores.target.len() * scores.impostor.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub eer: f64,
    pub eer_threshold: f64,
    pub min_dcf: f64,
    pub auc: f64,
}

impl MetricsReport {
    pub fn compute(scores: &TrialScoreSet) -> Result<Self> {
        let (eer, eer_threshold) = eer_with_threshold(scores)?;
        Ok(Self {
            eer,
            eer_threshold,
            min_dcf: dcf(scores, DEFAULT_P_TARGET)?,
            auc: auc(scores)?,
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "EER={:.6} minDCF={:.6} AUC={:.6}",
            self.eer, self.min_dcf, self.auc
        )
    }
}

/// Parses `label<TAB>score` lines, label being `target` or `impostor`.
pub fn parse_score_file(text: &str) -> Result<TrialScoreSet> {
    let mut set = TrialScoreSet::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::ScoreFile {
            line: n + 1,
            message,
        };
        let (label, value) = line
            .split_once('\t')
            .ok_or_else(|| err("expected label<TAB>score".into()))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| err(format!("bad score {value:?}: {e}")))?;
        match label {
            "target" => set.target.push(value),
            "impostor" => set.impostor.push(value),
            other => return Err(err(format!("unknown label {other:?}"))),
        }
    }
    Ok(set)
}

pub fn format_score_file(scores: &TrialScoreSet) -> String {
    let mut out = String::new();
    for s in &scores.target {
        out.push_str(&format!("target\t{s}\n"));
    }
    for s in &scores.impostor {
        out.push_str(&format!("impostor\t{s}\n"));
    }
    out
}

pub fn read_score_file(path: impl AsRef<Path>) -> Result<TrialScoreSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_score_file(&text)
}

pub fn write_score_file(path: impl AsRef<Path>, scores: &TrialScoreSet) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_score_file(scores)).map_err(|e| Error::io(path, e))
}
