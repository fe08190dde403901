use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::scene::AugmentPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    Uniform,
    /// Sample probability inversely proportional to class frequency.
    Balanced,
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMode::Uniform => "uniform",
            SamplerMode::Balanced => "balanced",
        })
    }
}

impl FromStr for SamplerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplerMode::Uniform),
            "balanced" => Ok(SamplerMode::Balanced),
            other => Err(Error::Invalid(format!("unknown sampler `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Peak learning rate η.
    pub learning_rate: f64,
    pub iterations: usize,
    pub warmup_fraction: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub augment: AugmentPolicy,
    pub sampler: SamplerMode,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Save a numbered checkpoint every this many iterations (0 = never).
    pub checkpoint_every: usize,
    /// Evaluate every this many iterations (0 = only at the end).
    pub eval_every: usize,
    /// Global gradient-norm clip; off when `None`.
    pub clip_norm: Option<f64>,
    /// Frame rate raw clips are sub-sampled to before tokenization.
    pub target_fps: f64,
    /// IOU threshold of the tracker that links raw detections.
    pub track_iou: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            iterations: 1000,
            warmup_fraction: 0.01,
            batch_size: 32,
            seed: 0,
            augment: AugmentPolicy::ALL,
            sampler: SamplerMode::Balanced,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            checkpoint_every: 0,
            eval_every: 0,
            clip_norm: None,
            target_fps: 5.0,
            track_iou: 0.5,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Invalid(format!("`{key}` value `{v}` is not valid")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "on" => Ok(true),
        "false" | "0" | "off" => Ok(false),
        _ => Err(Error::Invalid(format!("`{key}` value `{v}` is not a boolean"))),
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::Invalid(format!(
                "warmup_fraction {} outside (0, 1)",
                self.warmup_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("learning_rate {}", self.learning_rate)));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Invalid("clip_norm must be positive".into()));
        }
        if !(self.target_fps > 0.0 && (0.0..=1.0).contains(&self.track_iou)) {
            return Err(Error::Invalid("target_fps must be positive and track_iou in [0, 1]".into()));
        }
        Ok(())
    }

    /// Applies one setting; `false` for keys it does not own.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "learning_rate" => self.learning_rate = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "warmup_fraction" => self.warmup_fraction = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "augment_flip" => self.augment.flip = flag(key, value)?,
            "augment_crop" => self.augment.crop = flag(key, value)?,
            "augment_expand" => self.augment.expand = flag(key, value)?,
            "sampler" => self.sampler = value.parse()?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "target_fps" => self.target_fps = num(key, value)?,
            "track_iou" => self.track_iou = num(key, value)?,
            "clip_norm" => {
                self.clip_norm = match value {
                    "none" | "off" => None,
                    v => Some(num(key, v)?),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Parses flat `key=value` text holding model and training settings.
/// Blank lines and `#` comments are ignored; errors carry the line number.
pub fn parse_config(text: &str) -> Result<(ModelConfig, TrainConfig)> {
    let mut model = ModelConfig::default();
    let mut train = TrainConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, format!("expected key=value, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        let known = (|| -> Result<bool> { Ok(train.apply(k, v)? || model.apply(k, v)?) })()
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if !known {
            return Err(Error::parse(i + 1, format!("unknown setting `{k}`")));
        }
    }
    model.validate()?;
    train.validate()?;
    Ok((model, train))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_settings() {
        let (m, t) = parse_config("# micro\nhidden = 8\nheads=2\n\nlearning_rate=0.001\nsampler=uniform\nclip_norm=1.5\n")
            .unwrap();
        assert_eq!(m.hidden, 8);
        assert_eq!(t.learning_rate, 1e-3);
        assert_eq!(t.sampler, SamplerMode::Uniform);
        assert_eq!(t.clip_norm, Some(1.5));
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_config("hidden=8\nheads=2\nbogus=1\n").unwrap_err();
        assert_eq!(err.to_string(), "line 3: unknown setting `bogus`");
        let err = parse_config("hidden=eight\n").unwrap_err();
        assert!(err.to_string().starts_with("line 1:"), "{err}");
    }

    #[test]
    fn rejects_bad_warmup() {
        assert!(parse_config("warmup_fraction=1.0").is_err());
        assert!(parse_config("batch_size=0").is_err());
    }
}
