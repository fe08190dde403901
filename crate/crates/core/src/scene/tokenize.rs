use super::types::{Keypoint, SceneConfig, SceneSequence};
use crate::error::Result;

/// Four parallel token streams plus validity. Id 0 is padding everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedScene {
    pub position: Vec<usize>,
    pub token_type: Vec<usize>,
    pub segment: Vec<usize>,
    pub instance: Vec<usize>,
    pub mask: Vec<bool>,
}

impl TokenizedScene {
    pub fn padding(len: usize) -> Self {
        Self {
            position: vec![0; len],
            token_type: vec![0; len],
            segment: vec![0; len],
            instance: vec![0; len],
            mask: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    fn set(&mut self, i: usize, position: usize, token_type: usize, segment: usize, instance: usize) {
        self.position[i] = position;
        self.token_type[i] = token_type;
        self.segment[i] = segment;
        self.instance[i] = instance;
        self.mask[i] = true;
    }
}

/// Flat row-major cell id in `1..=W'·H'`, or 0 for an invalid keypoint.
/// Coordinates outside the image are clamped to the border cells.
pub fn quantize_position(
    kp: &Keypoint,
    width: f64,
    height: f64,
    grid_width: usize,
    grid_height: usize,
) -> usize {
    if !kp.valid {
        return 0;
    }
    let cell = |v: f64, extent: f64, cells: usize| -> usize {
        let c = (v / extent * cells as f64).floor();
        if c.is_nan() || c < 0.0 {
            1
        } else {
            (c as usize).min(cells - 1) + 1
        }
    };
    let cx = cell(kp.x, width, grid_width);
    let cy = cell(kp.y, height, grid_height);
    (cy - 1) * grid_width + cx
}

/// Emits tokens person-major, then frame, then joint, followed by objects.
///
/// Joint `k` of person `n` at frame `t` gets type `k`, segment `t`, instance
/// `n` (all 1-based). Object `j`'s `i`-th contour point gets type `k_h + i`,
/// the keyframe's segment and instance `N + j`. Missing persons, objects and
/// joints are padding.
pub fn tokenize_scene(scene: &SceneSequence, cfg: &SceneConfig) -> Result<TokenizedScene> {
    cfg.validate()?;
    scene.check(cfg)?;
    let mut out = TokenizedScene::padding(cfg.sequence_len());
    let quantize =
        |kp: &Keypoint| quantize_position(kp, scene.width, scene.height, cfg.grid_width, cfg.grid_height);
    let mut i = 0;
    for n in 0..cfg.persons {
        let human = scene.humans.get(n);
        for t in 0..cfg.frames {
            for k in 0..cfg.joints {
                if let Some(kp) = human.map(|h| &h.joints[t][k]).filter(|kp| kp.valid) {
                    out.set(i, quantize(kp), k + 1, t + 1, n + 1);
                }
                i += 1;
            }
        }
    }
    for j in 0..cfg.objects {
        let object = scene.objects.get(j);
        for p in 0..cfg.object_points {
            if let Some(kp) = object.map(|o| &o[p]).filter(|kp| kp.valid) {
                out.set(
                    i,
                    quantize(kp),
                    cfg.joints + p + 1,
                    scene.keyframe,
                    cfg.persons + j + 1,
                );
            }
            i += 1;
        }
    }
    Ok(out)
}
