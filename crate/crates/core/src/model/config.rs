use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scene::SceneConfig;

/// Encoder topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// One encoder over every token with all four embeddings summed.
    Flat,
    /// Keypoint encoder per (actor, frame) group, then an actor encoder.
    Hierarchical,
}

/// Prediction granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMode {
    /// One single-label prediction per clip.
    Video,
    /// Multi-label prediction per actor.
    Actor,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Flat => "flat",
            Architecture::Hierarchical => "hierarchical",
        })
    }
}

impl FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Architecture::Flat),
            "hierarchical" => Ok(Architecture::Hierarchical),
            other => Err(Error::Invalid(format!("unknown architecture `{other}`"))),
        }
    }
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadMode::Video => "video",
            HeadMode::Actor => "actor",
        })
    }
}

impl FromStr for HeadMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(HeadMode::Video),
            "actor" => Ok(HeadMode::Actor),
            other => Err(Error::Invalid(format!("unknown head mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub head: HeadMode,
    /// Model width D.
    pub hidden: usize,
    pub heads: usize,
    /// Blocks per encoder.
    pub layers: usize,
    /// Feed-forward width.
    pub intermediate: usize,
    pub dropout: f64,
    pub layer_norm_eps: f64,
    pub init_std: f64,
    pub classes: usize,
    pub scene: SceneConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Hierarchical,
            head: HeadMode::Actor,
            hidden: 128,
            heads: 4,
            layers: 4,
            intermediate: 128,
            dropout: 0.1,
            layer_norm_eps: 1e-12,
            init_std: 0.02,
            classes: 20,
            scene: SceneConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.hidden == 0 || self.heads == 0 || self.layers == 0 || self.intermediate == 0 {
            return Err(Error::Invalid("model extents must be positive".into()));
        }
        if self.hidden % self.heads != 0 {
            return Err(Error::Invalid(format!(
                "hidden {} not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if self.classes < 1 {
            return Err(Error::Invalid("need at least one class".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn encoder_count(&self) -> usize {
        match self.architecture {
            Architecture::Flat => 1,
            Architecture::Hierarchical => 2,
        }
    }

    /// Vocabulary sizes `[position, type, segment, instance]`, each counting padding.
    pub fn vocabularies(&self) -> [usize; 4] {
        let s = &self.scene;
        [
            s.position_vocab(),
            s.type_vocab(),
            s.segment_vocab(),
            s.instance_vocab(),
        ]
    }

    /// Trainable scalars in one encoder block.
    pub fn block_parameters(&self) -> usize {
        let (d, i) = (self.hidden, self.intermediate);
        4 * (d * d + d) + (d * i + i) + (i * d + d) + 4 * d
    }

    /// Exact trainable scalar count. Padding rows are frozen and excluded.
    pub fn count_parameters(&self) -> usize {
        let d = self.hidden;
        let embeddings: usize = self.vocabularies().iter().map(|v| (v - 1) * d).sum();
        let cls = self.encoder_count() * d;
        let encoders = self.encoder_count() * self.layers * self.block_parameters();
        let head = d * self.classes + self.classes;
        embeddings + cls + encoders + head
    }

    /// `key=value` records, in a fixed order.
    pub fn to_records(&self) -> Vec<(String, String)> {
        let s = &self.scene;
        [
            ("architecture", self.architecture.to_string()),
            ("head", self.head.to_string()),
            ("hidden", self.hidden.to_string()),
            ("heads", self.heads.to_string()),
            ("layers", self.layers.to_string()),
            ("intermediate", self.intermediate.to_string()),
            ("dropout", self.dropout.to_string()),
            ("layer_norm_eps", self.layer_norm_eps.to_string()),
            ("init_std", self.init_std.to_string()),
            ("classes", self.classes.to_string()),
            ("grid_width", s.grid_width.to_string()),
            ("grid_height", s.grid_height.to_string()),
            ("frames", s.frames.to_string()),
            ("persons", s.persons.to_string()),
            ("objects", s.objects.to_string()),
            ("joints", s.joints.to_string()),
            ("object_points", s.object_points.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Applies one `key=value` setting; returns `false` for keys it does not own.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Invalid(format!("`{key}` value `{v}` is not a number")))
        }
        match key {
            "architecture" => self.architecture = value.parse()?,
            "head" => self.head = value.parse()?,
            "hidden" => self.hidden = num(key, value)?,
            "heads" => self.heads = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "intermediate" => self.intermediate = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "layer_norm_eps" => self.layer_norm_eps = num(key, value)?,
            "init_std" => self.init_std = num(key, value)?,
            "classes" => self.classes = num(key, value)?,
            "grid_width" => self.scene.grid_width = num(key, value)?,
            "grid_height" => self.scene.grid_height = num(key, value)?,
            "frames" => self.scene.frames = num(key, value)?,
            "persons" => self.scene.persons = num(key, value)?,
            "objects" => self.scene.objects = num(key, value)?,
            "joints" => self.scene.joints = num(key, value)?,
            "object_points" => self.scene.object_points = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in records {
            if !cfg.apply(k, v)? {
                return Err(Error::Invalid(format!("unknown model setting `{k}`")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let cfg = ModelConfig {
            dropout: 0.125,
            architecture: Architecture::Flat,
            ..ModelConfig::default()
        };
        let recs = cfg.to_records();
        let back =
            ModelConfig::from_records(recs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_indivisible_heads() {
        let cfg = ModelConfig {
            hidden: 10,
            heads: 3,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
