use rand::Rng;

use super::types::{Keypoint, SceneSequence};
use crate::error::{Error, Result};
use crate::tracking::BBox;

/// Which keypoint-space augmentations may fire; each enabled one is applied
/// with probability one half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AugmentPolicy {
    pub flip: bool,
    pub crop: bool,
    pub expand: bool,
}

impl AugmentPolicy {
    pub const NONE: AugmentPolicy = AugmentPolicy {
        flip: false,
        crop: false,
        expand: false,
    };
    pub const ALL: AugmentPolicy = AugmentPolicy {
        flip: true,
        crop: true,
        expand: true,
    };
}

pub const CROP_SCALE: (f64, f64) = (0.6, 1.0);
pub const MAX_EXPAND: f64 = 1.5;

fn map_points(scene: &mut SceneSequence, mut f: impl FnMut(Keypoint) -> Keypoint) {
    for h in &mut scene.humans {
        for frame in &mut h.joints {
            for kp in frame.iter_mut().filter(|k| k.valid) {
                *kp = f(*kp);
            }
        }
    }
    for obj in &mut scene.objects {
        for kp in obj.iter_mut().filter(|k| k.valid) {
            *kp = f(*kp);
        }
    }
}

/// Mirrors horizontally and swaps left/right joints via `joint_flip`
/// (`joint_flip[k]` is the joint that `k` becomes).
pub fn flip(scene: &SceneSequence, joint_flip: &[usize]) -> Result<SceneSequence> {
    let mut out = scene.clone();
    let w = scene.width;
    for h in &mut out.humans {
        if joint_flip.len() != h.joints.first().map_or(0, Vec::len) {
            return Err(Error::Shape(format!(
                "flip permutation of {} for {} joints",
                joint_flip.len(),
                h.joints.first().map_or(0, Vec::len)
            )));
        }
        for frame in &mut h.joints {
            let src = frame.clone();
            for (k, kp) in src.iter().enumerate() {
                frame[joint_flip[k]] = *kp;
            }
        }
        h.keyframe_box = h.keyframe_box.map(|b| BBox {
            x1: w - b.x2,
            y1: b.y1,
            x2: w - b.x1,
            y2: b.y2,
        });
    }
    map_points(&mut out, |k| Keypoint::new(w - k.x, k.y));
    Ok(out)
}

/// Restricts to the window `[x0, x0+w) × [y0, y0+h)` and rebases coordinates;
/// keypoints outside become invalid.
pub fn crop(scene: &SceneSequence, x0: f64, y0: f64, w: f64, h: f64) -> SceneSequence {
    let mut out = scene.clone();
    out.width = w;
    out.height = h;
    map_points(&mut out, |k| {
        let (x, y) = (k.x - x0, k.y - y0);
        if (0.0..w).contains(&x) && (0.0..h).contains(&y) {
            Keypoint::new(x, y)
        } else {
            Keypoint::INVALID
        }
    });
    for hum in &mut out.humans {
        hum.keyframe_box = hum.keyframe_box.and_then(|b| {
            BBox::new(
                (b.x1 - x0).max(0.0),
                (b.y1 - y0).max(0.0),
                (b.x2 - x0).min(w),
                (b.y2 - y0).min(h),
            )
            .ok()
        });
    }
    out
}

/// Places the frame at `(ox, oy)` on a `canvas_w × canvas_h` canvas.
pub fn expand(scene: &SceneSequence, canvas_w: f64, canvas_h: f64, ox: f64, oy: f64) -> SceneSequence {
    let mut out = scene.clone();
    out.width = canvas_w;
    out.height = canvas_h;
    map_points(&mut out, |k| Keypoint::new(k.x + ox, k.y + oy));
    for hum in &mut out.humans {
        hum.keyframe_box = hum.keyframe_box.map(|b| BBox {
            x1: b.x1 + ox,
            y1: b.y1 + oy,
            x2: b.x2 + ox,
            y2: b.y2 + oy,
        });
    }
    out
}

/// Random flip, crop (scale in `[0.6, 1.0]`) and expand (canvas up to 1.5×).
/// Labels are untouched.
pub fn augment<R: Rng + ?Sized>(
    scene: &SceneSequence,
    rng: &mut R,
    policy: AugmentPolicy,
    joint_flip: &[usize],
) -> Result<SceneSequence> {
    let mut out = scene.clone();
    if policy.flip && rng.random_bool(0.5) {
        out = flip(&out, joint_flip)?;
    }
    if policy.crop && rng.random_bool(0.5) {
        let s = rng.random_range(CROP_SCALE.0..=CROP_SCALE.1);
        let (w, h) = (out.width * s, out.height * s);
        let x0 = rng.random_range(0.0..=out.width - w);
        let y0 = rng.random_range(0.0..=out.height - h);
        out = crop(&out, x0, y0, w, h);
    }
    if policy.expand && rng.random_bool(0.5) {
        let r = rng.random_range(1.0..=MAX_EXPAND);
        let (w, h) = (out.width * r, out.height * r);
        let ox = rng.random_range(0.0..=w - out.width);
        let oy = rng.random_range(0.0..=h - out.height);
        out = expand(&out, w, h, ox, oy);
    }
    Ok(out)
}
