use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::attention::AttentionMode;
use crate::features::MIN_CROP;
use crate::{Error, Result};

/// Training and model hyperparameters, read from `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Speakers per batch (N).
    pub speakers_per_batch: usize,
    /// Utterances per speaker in a batch (M).
    pub utterances_per_speaker: usize,
    /// Crop length in frames (L).
    pub crop_frames: usize,
    pub d_a: usize,
    pub d_r: usize,
    pub attention: AttentionMode,
    pub lr: f64,
    pub alpha: f64,
    pub steps: usize,
    pub seed: u64,
    pub include_biases: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            speakers_per_batch: 4,
            utterances_per_speaker: 3,
            crop_frames: 60,
            d_a: 512,
            d_r: 5,
            attention: AttentionMode::Single,
            lr: 0.01,
            alpha: 0.1,
            steps: 300,
            seed: 1,
            include_biases: true,
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Config {
        line,
        message: format!("{key}: {e}"),
    })
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.speakers_per_batch < 2 {
            return fail(format!(
                "speakers_per_batch must be >= 2, got {}",
                self.speakers_per_batch
            ));
        }
        if self.utterances_per_speaker < 2 {
            return fail(format!(
                "utterances_per_speaker must be >= 2, got {}",
                self.utterances_per_speaker
            ));
        }
        if self.crop_frames < MIN_CROP {
            return fail(format!(
                "crop_frames must be >= {MIN_CROP}, got {}",
                self.crop_frames
            ));
        }
        if self.d_a == 0 || self.d_r == 0 {
            return fail("d_a and d_r must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if self.steps == 0 {
            return fail("steps must be >= 1".into());
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected key = value, got {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key {key}"),
                });
            }
            match key {
                "speakers_per_batch" => cfg.speakers_per_batch = parse_value(line, key, value)?,
                "utterances_per_speaker" => {
                    cfg.utterances_per_speaker = parse_value(line, key, value)?
                }
                "crop_frames" => cfg.crop_frames = parse_value(line, key, value)?,
                "d_a" => cfg.d_a = parse_value(line, key, value)?,
                "d_r" => cfg.d_r = parse_value(line, key, value)?,
                "attention" => cfg.attention = parse_value(line, key, value)?,
                "lr" => cfg.lr = parse_value(line, key, value)?,
                "alpha" => cfg.alpha = parse_value(line, key, value)?,
                "steps" => cfg.steps = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "include_biases" => cfg.include_biases = parse_value(line, key, value)?,
                other => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown key {other}"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "speakers_per_batch = {}", self.speakers_per_batch)?;
        writeln!(
            f,
            "utterances_per_speaker = {}",
            self.utterances_per_speaker
        )?;
        writeln!(f, "crop_frames = {}", self.crop_frames)?;
        writeln!(f, "d_a = {}", self.d_a)?;
        writeln!(f, "d_r = {}", self.d_r)?;
        writeln!(f, "attention = {}", self.attention)?;
        writeln!(f, "lr = {}", self.lr)?;
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "include_biases = {}", self.include_biases)
    }
}
