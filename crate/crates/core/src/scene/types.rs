use crate::error::{Error, Result};
use crate::tracking::BBox;

/// Confidence below which an estimated joint is treated as missing.
pub const JOINT_CONFIDENCE_THRESHOLD: f64 = 0.3;

/// A joint or object-contour point in source-image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

impl Keypoint {
    pub const INVALID: Keypoint = Keypoint {
        x: 0.0,
        y: 0.0,
        valid: false,
    };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, valid: true }
    }

    /// Applies the ingestion confidence threshold.
    pub fn from_estimate(x: f64, y: f64, confidence: f64) -> Self {
        if confidence >= JOINT_CONFIDENCE_THRESHOLD && x.is_finite() && y.is_finite() {
            Self::new(x, y)
        } else {
            Self::INVALID
        }
    }
}

/// Token grid and sequence extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneConfig {
    /// Position grid columns (W').
    pub grid_width: usize,
    /// Position grid rows (H').
    pub grid_height: usize,
    /// Frames per clip (T).
    pub frames: usize,
    /// Human tracklets kept (N).
    pub persons: usize,
    /// Objects kept (M).
    pub objects: usize,
    /// Joints per person (k_h).
    pub joints: usize,
    /// Contour samples per object (k_o).
    pub object_points: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            grid_width: 32,
            grid_height: 24,
            frames: 10,
            persons: 5,
            objects: 3,
            joints: 17,
            object_points: crate::geometry::DEFAULT_OBJECT_KEYPOINTS,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("grid_width", self.grid_width),
            ("grid_height", self.grid_height),
            ("frames", self.frames),
            ("persons", self.persons),
            ("joints", self.joints),
            ("object_points", self.object_points),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Invalid(format!("scene config `{name}` must be positive")));
        }
        Ok(())
    }

    /// Fixed token sequence length `N·T·k_h + M·k_o`.
    pub fn sequence_len(&self) -> usize {
        self.persons * self.frames * self.joints + self.objects * self.object_points
    }

    pub fn position_vocab(&self) -> usize {
        self.grid_width * self.grid_height + 1
    }

    pub fn type_vocab(&self) -> usize {
        self.joints + self.object_points + 1
    }

    pub fn segment_vocab(&self) -> usize {
        self.frames + 1
    }

    pub fn instance_vocab(&self) -> usize {
        self.persons + self.objects + 1
    }
}

/// One tracked actor over the clip's `T` frames.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanTrack {
    /// `[T][k_h]` joints; frames without a detection hold invalid keypoints.
    pub joints: Vec<Vec<Keypoint>>,
    /// Actor box on the keyframe, when the actor was detected there.
    pub keyframe_box: Option<BBox>,
    /// Actor-level class indices (multi-label).
    pub labels: Vec<usize>,
}

impl HumanTrack {
    pub fn has_valid_joint(&self) -> bool {
        self.joints.iter().flatten().any(|k| k.valid)
    }
}

/// Scene sequence for one clip: human tracklets plus keyframe object keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSequence {
    pub width: f64,
    pub height: f64,
    pub frames: usize,
    pub humans: Vec<HumanTrack>,
    /// `[M][k_o]` object contour keypoints from the keyframe.
    pub objects: Vec<Vec<Keypoint>>,
    /// 1-based keyframe position within the `T` frames.
    pub keyframe: usize,
    /// Video-level class index.
    pub label: Option<usize>,
}

impl SceneSequence {
    pub fn empty(width: f64, height: f64, frames: usize) -> Self {
        Self {
            width,
            height,
            frames,
            humans: Vec::new(),
            objects: Vec::new(),
            keyframe: frames.div_ceil(2).max(1),
            label: None,
        }
    }

    /// Checks the scene against the extents it will be tokenized with.
    pub fn check(&self, cfg: &SceneConfig) -> Result<()> {
        if self.frames != cfg.frames {
            return Err(Error::Invalid(format!(
                "scene has {} frames, config expects {}",
                self.frames, cfg.frames
            )));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Invalid(format!(
                "image extents {}x{}",
                self.width, self.height
            )));
        }
        if self.keyframe == 0 || self.keyframe > self.frames {
            return Err(Error::Invalid(format!(
                "keyframe {} outside 1..={}",
                self.keyframe, self.frames
            )));
        }
        if self.humans.len() > cfg.persons || self.objects.len() > cfg.objects {
            return Err(Error::Invalid(format!(
                "{} humans / {} objects exceed N={} / M={}",
                self.humans.len(),
                self.objects.len(),
                cfg.persons,
                cfg.objects
            )));
        }
        for h in &self.humans {
            if h.joints.len() != self.frames || h.joints.iter().any(|f| f.len() != cfg.joints) {
                return Err(Error::Shape(format!(
                    "human track is not {}x{} joints",
                    self.frames, cfg.joints
                )));
            }
        }
        if self.objects.iter().any(|o| o.len() != cfg.object_points) {
            return Err(Error::Shape(format!(
                "object without {} keypoints",
                cfg.object_points
            )));
        }
        Ok(())
    }
}
