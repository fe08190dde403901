//! Parameterized skeleton-motion clips for desk-scale end-to-end runs.
//!
//! Two classes that share a motion pattern and differ only in the shape of
//! the object they touch are indistinguishable from human joints alone. The
//! generator measures that with a nearest-centroid oracle.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::format::{
    round6, save_knd, ActorRecord, ClipRecord, FrameRecord, Header, ObjectRecord, PersonRecord, Record,
};
use crate::error::{Error, Result};
use crate::geometry::{object_keypoints, BinaryMask, DEFAULT_OBJECT_KEYPOINTS};

/// Joint names of the 15-joint skeleton, in index order.
pub const SKELETON: [&str; 15] = [
    "neck", "belly", "face", "r_shoulder", "l_shoulder", "r_hip", "l_hip", "r_elbow",
    "l_elbow", "r_knee", "l_knee", "r_wrist", "l_wrist", "r_ankle", "l_ankle",
];

/// Mirror permutation of [`SKELETON`].
pub const SKELETON_FLIP: [usize; 15] = [0, 1, 2, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13];

// rest pose relative to the hip centre, in body heights
const REST: [(f64, f64); 15] = [
    (0.0, -0.55),
    (0.0, -0.3),
    (0.0, -0.68),
    (-0.12, -0.55),
    (0.12, -0.55),
    (-0.08, 0.0),
    (0.08, 0.0),
    (-0.16, -0.38),
    (0.16, -0.38),
    (-0.09, 0.25),
    (0.09, 0.25),
    (-0.18, -0.22),
    (0.18, -0.22),
    (-0.1, 0.5),
    (0.1, 0.5),
];

const SHOULDER: [usize; 2] = [3, 4];
const ELBOW: [usize; 2] = [7, 8];
const WRIST: [usize; 2] = [11, 12];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    /// Whole-body horizontal drift.
    Translate,
    /// Raised wrist oscillating sideways.
    Wave,
    /// Upper body lowers and rises again.
    Crouch,
    /// One wrist moves out to a target point.
    Reach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectShape {
    /// Small filled disk.
    Ball,
    /// Long thin horizontal rectangle.
    Bar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub motion: Motion,
    /// Motion magnitude multiplier.
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Object the actor interacts with. Without one, the actor may get a distractor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectShape>,
    /// Overrides `clips_per_class` for this class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clips: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: Vec<ClassSpec>,
    pub clips_per_class: usize,
    /// Frames per clip after sub-sampling (T).
    pub frames: usize,
    /// Source frames per kept frame.
    pub stride: usize,
    /// Source frame rate.
    pub fps: f64,
    /// Joint noise standard deviation in pixels.
    pub jitter: f64,
    pub seed: u64,
    /// Actors per clip. With more than one, labels are per actor.
    pub actors: usize,
    /// Half-range of the random actor placement, as a fraction of the image.
    pub placement: f64,
    /// Give actors of object-free classes a random object nearby.
    #[serde(default = "yes")]
    pub distractors: bool,
    /// Fraction of each class held out for testing.
    pub holdout: f64,
    pub width: f64,
    pub height: f64,
}

impl SynthSpec {
    /// Four classes, 50 clips each: wave, crouch and two reach classes that
    /// differ only in the touched object.
    pub fn standard(seed: u64) -> Self {
        let class = |name: &str, motion, object| ClassSpec {
            name: name.into(),
            motion,
            amplitude: 1.0,
            object,
            clips: None,
        };
        Self {
            classes: vec![
                class("wave", Motion::Wave, None),
                class("crouch", Motion::Crouch, None),
                class("reach_ball", Motion::Reach, Some(ObjectShape::Ball)),
                class("reach_bar", Motion::Reach, Some(ObjectShape::Bar)),
            ],
            clips_per_class: 50,
            frames: 10,
            stride: 2,
            fps: 10.0,
            jitter: 1.5,
            seed,
            actors: 1,
            placement: 0.03,
            distractors: false,
            holdout: 0.2,
            width: 320.0,
            height: 240.0,
        }
    }

    /// Three actors per clip with per-actor labels from four motion classes.
    pub fn multi_actor(seed: u64) -> Self {
        let class = |name: &str, motion| ClassSpec {
            name: name.into(),
            motion,
            amplitude: 1.0,
            object: None,
            clips: None,
        };
        Self {
            classes: vec![
                class("translate", Motion::Translate),
                class("wave", Motion::Wave),
                class("crouch", Motion::Crouch),
                class("reach", Motion::Reach),
            ],
            actors: 3,
            ..Self::standard(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Invalid("a synthetic spec needs at least two classes".into()));
        }
        if self.frames == 0 || self.stride == 0 || self.actors == 0 {
            return Err(Error::Invalid("frames, stride and actors must be positive".into()));
        }
        if !(self.fps > 0.0 && self.width >= 64.0 && self.height >= 64.0) {
            return Err(Error::Invalid("fps must be positive and the image at least 64x64".into()));
        }
        if !(self.jitter >= 0.0 && (0.0..1.0).contains(&self.holdout)) {
            return Err(Error::Invalid("jitter must be non-negative and holdout in [0, 1)".into()));
        }
        if !(0.0..=0.1).contains(&self.placement) {
            return Err(Error::Invalid("placement must lie in [0, 0.1]".into()));
        }
        if self.classes.iter().any(|c| !(c.amplitude.is_finite() && c.amplitude >= 0.0)) {
            return Err(Error::Invalid("class amplitudes must be non-negative".into()));
        }
        Ok(())
    }

    pub fn clip_count(&self, class: usize) -> usize {
        self.classes[class].clips.unwrap_or(self.clips_per_class)
    }

    pub fn header(&self) -> Header {
        Header {
            classes: self.classes.iter().map(|c| c.name.clone()).collect(),
            joints: SKELETON.len(),
            flip_perm: SKELETON_FLIP.to_vec(),
        }
    }

    /// Source frame count and 0-based keyframe of every clip; the keyframe
    /// sits on the sub-sampling grid at the centre slot of the `T` kept frames.
    pub fn source_layout(&self) -> (usize, usize) {
        (self.frames * self.stride, self.stride * (self.frames.div_ceil(2) - 1))
    }

    pub fn target_fps(&self) -> f64 {
        self.fps / self.stride as f64
    }
}

/// A generated clip and the masks its object records point to.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub record: ClipRecord,
    pub masks: Vec<(String, BinaryMask)>,
}

/// Oracle accuracies on one class pair that only objects tell apart.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityReport {
    pub pair: (usize, usize),
    pub human_only: f64,
    pub object_aware: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub header: Header,
    pub train: Vec<SynthClip>,
    pub test: Vec<SynthClip>,
    pub ambiguity: Vec<AmbiguityReport>,
}

impl SynthDataset {
    pub fn clips(&self) -> impl Iterator<Item = &SynthClip> {
        self.train.iter().chain(&self.test)
    }

    /// Mask lookup over every clip, keyed by the path in the records.
    pub fn mask_table(&self) -> BTreeMap<String, BinaryMask> {
        self.clips().flat_map(|c| c.masks.iter().cloned()).collect()
    }

    /// Writes `train.knd`, `test.knd` (each led by the header) and the
    /// referenced PGM masks under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, clips) in [("train.knd", &self.train), ("test.knd", &self.test)] {
            let records: Vec<Record> = std::iter::once(Record::Header(self.header.clone()))
                .chain(clips.iter().map(|c| Record::Clip(c.record.clone())))
                .collect();
            save_knd(&dir.join(name), &records)?;
        }
        let masks = dir.join("masks");
        fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;
        for (path, mask) in self.clips().flat_map(|c| &c.masks) {
            mask.write_pgm(dir.join(path))?;
        }
        Ok(())
    }
}

struct Actor {
    class: usize,
    joints: Vec<Vec<(f64, f64)>>,
    object: Option<(ObjectShape, f64, f64)>,
}

fn pose(motion: Motion, amplitude: f64, u: f64, side: usize, phase: f64, target: (f64, f64)) -> Vec<(f64, f64)> {
    let mut j: Vec<(f64, f64)> = REST.to_vec();
    let s = if side == 0 { -1.0 } else { 1.0 };
    match motion {
        Motion::Translate => {
            let dx = s * 0.5 * amplitude * u;
            j.iter_mut().for_each(|p| p.0 += dx);
            // stride the legs a little
            let step = 0.04 * (2.0 * PI * 2.0 * u + phase).sin();
            j[9].0 += step;
            j[13].0 += step;
            j[10].0 -= step;
            j[14].0 -= step;
        }
        Motion::Wave => {
            let sh = j[SHOULDER[side]];
            let swing = 0.1 * amplitude * (2.0 * PI * 2.0 * u + phase).sin();
            j[ELBOW[side]] = (sh.0 + s * 0.12, sh.1 - 0.08);
            j[WRIST[side]] = (sh.0 + s * 0.12 + swing, sh.1 - 0.28);
        }
        Motion::Crouch => {
            let d = 0.25 * amplitude * (PI * u).sin();
            for (k, p) in j.iter_mut().enumerate() {
                match k {
                    13 | 14 => {}
                    9 | 10 => {
                        p.1 += 0.5 * d;
                        p.0 += if k == 9 { -0.3 * d } else { 0.3 * d };
                    }
                    _ => p.1 += d,
                }
            }
        }
        Motion::Reach => {
            let p = (1.25 * u).min(1.0);
            let p = p * p * (3.0 - 2.0 * p);
            let sh = j[SHOULDER[side]];
            let rest = j[WRIST[side]];
            let w = (rest.0 + (target.0 - rest.0) * p, rest.1 + (target.1 - rest.1) * p);
            j[WRIST[side]] = w;
            j[ELBOW[side]] = ((sh.0 + w.0) / 2.0, (sh.1 + w.1) / 2.0 + 0.03);
        }
    }
    j
}

fn rasterize(shape: ObjectShape, cx: f64, cy: f64, height: f64, w: usize, h: usize) -> Result<BinaryMask> {
    let mut bits = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            bits[y * w + x] = match shape {
                ObjectShape::Ball => (px - cx).powi(2) + (py - cy).powi(2) <= (0.08 * height).powi(2),
                ObjectShape::Bar => (px - cx).abs() <= 0.4 * height && (py - cy).abs() <= 0.035 * height,
            };
        }
    }
    BinaryMask::new(w, h, bits)
}

fn half_width(shape: ObjectShape, height: f64) -> f64 {
    match shape {
        ObjectShape::Ball => 0.08 * height,
        ObjectShape::Bar => 0.4 * height,
    }
}

fn round_box(b: [f64; 4]) -> [f64; 4] {
    b.map(round6)
}

fn joints_box(joints: &[(f64, f64)], height: f64, w: f64, h: f64) -> [f64; 4] {
    let m = 0.08 * height;
    let x1 = joints.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - m;
    let y1 = joints.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) - m;
    let x2 = joints.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + m;
    let y2 = joints.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) + m;
    round_box([x1.max(0.0), y1.max(0.0), x2.min(w), y2.min(h)])
}

struct ClipDraw<'a> {
    spec: &'a SynthSpec,
    id: String,
    classes: Vec<usize>,
}

fn generate_clip(draw: &ClipDraw<'_>, rng: &mut ChaCha8Rng) -> Result<(SynthClip, Vec<Actor>)> {
    let spec = draw.spec;
    let (w, h) = (spec.width, spec.height);
    let (source_frames, keyframe) = spec.source_layout();
    let jitter = Normal::new(0.0, spec.jitter.max(1e-12)).expect("positive deviation");
    let slots = draw.classes.len();
    let mut actors = Vec::with_capacity(slots);
    for (i, &class) in draw.classes.iter().enumerate() {
        let c = &spec.classes[class];
        let height = rng.random_range(0.27..0.29) * h;
        let lane = w / slots as f64;
        let spread = spec.placement;
        let cx = lane * (i as f64 + 0.5) + rng.random_range(-spread..=spread) * w;
        // hips slightly below the image centre
        let cy = (0.55 + rng.random_range(-spread..=spread)) * h;
        let side = rng.random_range(0..2);
        let phase = rng.random_range(0.0..2.0 * PI);
        // reach target relative to the shoulder, in body heights
        let s = if side == 0 { -1.0 } else { 1.0 };
        let target = (REST[SHOULDER[side]].0 + s * 0.4, REST[SHOULDER[side]].1 + rng.random_range(-0.08..0.08));
        let joints: Vec<Vec<(f64, f64)>> = (0..source_frames)
            .map(|f| {
                let u = f as f64 / (source_frames.max(2) - 1) as f64;
                pose(c.motion, c.amplitude, u, side, phase, target)
                    .into_iter()
                    .map(|(x, y)| (cx + x * height, cy + y * height))
                    .collect()
            })
            .collect();
        let object = match (c.object, c.motion) {
            (Some(shape), Motion::Reach) => {
                let hw = half_width(shape, height);
                let ox = cx + target.0 * height + s * hw;
                let oy = cy + target.1 * height;
                Some((shape, ox.clamp(hw + 2.0, w - hw - 2.0), oy))
            }
            (_, _) if !spec.distractors && c.object.is_none() => None,
            (shape, _) => {
                let shape = shape.unwrap_or(if rng.random_bool(0.5) { ObjectShape::Ball } else { ObjectShape::Bar });
                let hw = half_width(shape, height);
                // on the far side of the actor's lane, away from the body
                let ox = if rng.random_bool(0.5) { cx - 0.5 * height - hw } else { cx + 0.5 * height + hw };
                let oy = cy + rng.random_range(-0.6..0.3) * height;
                Some((shape, ox.clamp(hw + 2.0, w - hw - 2.0), oy))
            }
        };
        let score: f64 = rng.random_range(0.8..0.99);
        actors.push((Actor { class, joints, object }, height, score));
    }

    let bystander = (rng.random_bool(0.3)).then(|| {
        let height = rng.random_range(0.2..0.25) * h;
        let x = if rng.random_bool(0.5) { 0.08 * w } else { 0.92 * w };
        (x, 0.88 * h - 0.5 * height, height, rng.random_range(0.35..0.55))
    });

    let mut frames = Vec::with_capacity(source_frames);
    for f in 0..source_frames {
        let mut persons = Vec::new();
        for (a, height, score) in &actors {
            let joints: Vec<[f64; 3]> = a.joints[f]
                .iter()
                .map(|&(x, y)| {
                    let conf = if rng.random_bool(0.02) {
                        rng.random_range(0.0..0.25)
                    } else {
                        rng.random_range(0.6..1.0)
                    };
                    [
                        round6(x + jitter.sample(rng)),
                        round6(y + jitter.sample(rng)),
                        round6(conf),
                    ]
                })
                .collect();
            let score = (*score + rng.random_range(-0.02f64..0.02)).clamp(0.0, 1.0);
            persons.push(PersonRecord {
                bbox: joints_box(&a.joints[f], *height, w, h),
                score: round6(score),
                joints,
            });
        }
        if let Some((bx, by, bh, bs)) = bystander {
            let joints: Vec<(f64, f64)> = REST.iter().map(|&(x, y)| (bx + x * bh, by + y * bh)).collect();
            persons.push(PersonRecord {
                bbox: joints_box(&joints, bh, w, h),
                score: round6(bs),
                joints: joints
                    .iter()
                    .map(|&(x, y)| [round6(x + jitter.sample(rng)), round6(y + jitter.sample(rng)), 0.7])
                    .collect(),
            });
        }
        // detector output order is not tied to identity
        if rng.random_bool(0.5) {
            persons.reverse();
        }
        frames.push(FrameRecord { persons });
    }

    let (mw, mh) = (w.round() as usize, h.round() as usize);
    let mut objects = Vec::new();
    let mut masks = Vec::new();
    for (j, (a, height, _)) in actors.iter().enumerate() {
        if let Some((shape, ox, oy)) = a.object {
            let path = format!("masks/{}-{j}.pgm", draw.id);
            masks.push((path.clone(), rasterize(shape, ox, oy, *height, mw, mh)?));
            objects.push(ObjectRecord {
                mask: Some(path),
                keypoints: None,
            });
        }
    }
    let single = slots == 1;
    let record = ClipRecord {
        id: draw.id.clone(),
        width: w,
        height: h,
        fps: spec.fps,
        keyframe,
        frames,
        objects,
        label: single.then(|| draw.classes[0]),
        actors: actors
            .iter()
            .map(|(a, height, _)| ActorRecord {
                bbox: joints_box(&a.joints[keyframe], *height, w, h),
                labels: vec![a.class],
            })
            .collect(),
    };
    Ok((SynthClip { record, masks }, actors.into_iter().map(|(a, _, _)| a).collect()))
}

/// Generates the dataset: per-class clips in class order, the last
/// `round(holdout·count)` of each class held out, and an oracle report for
/// every class pair that shares its motion but not its object.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut features: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    let c = spec.classes.len();
    for class in 0..c {
        let count = spec.clip_count(class);
        let held = (spec.holdout * count as f64).round() as usize;
        for i in 0..count {
            let classes = if spec.actors == 1 {
                vec![class]
            } else {
                // the first actor carries the stratification class
                std::iter::once(class)
                    .chain((1..spec.actors).map(|_| rng.random_range(0..c)))
                    .collect()
            };
            let draw = ClipDraw {
                spec,
                id: format!("{}-{i:04}", spec.classes[class].name),
                classes,
            };
            let (clip, actors) = generate_clip(&draw, &mut rng)?;
            if spec.actors == 1 {
                features.push(oracle_features(&clip, &actors[0])?);
            }
            if i >= count - held {
                test.push(clip);
            } else {
                train.push(clip);
            }
        }
    }
    let ambiguity = ambiguous_pairs(spec)
        .into_iter()
        .map(|pair| ambiguity_report(&features, pair))
        .collect();
    Ok(SynthDataset {
        header: spec.header(),
        train,
        test,
        ambiguity,
    })
}

/// Class pairs with the same motion and amplitude but different objects.
pub fn ambiguous_pairs(spec: &SynthSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..spec.classes.len() {
        for b in a + 1..spec.classes.len() {
            let (x, y) = (&spec.classes[a], &spec.classes[b]);
            if x.motion == y.motion && x.amplitude == y.amplitude && x.object != y.object {
                out.push((a, b));
            }
        }
    }
    out
}

// human: joints relative to the first-frame hip centre, in body heights;
// object: contour keypoints relative to their centroid
fn oracle_features(clip: &SynthClip, actor: &Actor) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let first = &actor.joints[0];
    let (hx, hy) = ((first[5].0 + first[6].0) / 2.0, (first[5].1 + first[6].1) / 2.0);
    let scale = (first[13].1 - first[2].1).abs().max(1.0);
    let human = actor
        .joints
        .iter()
        .flatten()
        .flat_map(|&(x, y)| [(x - hx) / scale, (y - hy) / scale])
        .collect();
    let mut object = Vec::new();
    if let Some((_, mask)) = clip.masks.first() {
        let seed = mask
            .first_foreground()
            .ok_or_else(|| Error::Invalid("empty synthetic mask".into()))?;
        let pts = object_keypoints(mask, seed, DEFAULT_OBJECT_KEYPOINTS)?;
        let (mx, my) = (
            pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64,
            pts.iter().map(|p| p.y).sum::<f64>() / pts.len() as f64,
        );
        object.extend(pts.iter().flat_map(|p| [(p.x - mx) / scale, (p.y - my) / scale]));
    }
    Ok((actor.class, human, object))
}

/// Nearest-centroid accuracy under `folds`-fold cross-validation (row `i`
/// is held out in fold `i % folds`). Features are z-scored with training-fold
/// statistics and each feature block (consecutive lengths in `blocks`) has
/// equal total weight in the distance. Held-out rows never touch the
/// centroids, so identically distributed classes score chance in expectation.
pub fn nearest_centroid_accuracy(rows: &[(usize, Vec<f64>)], blocks: &[usize], folds: usize) -> f64 {
    if rows.is_empty() || folds < 2 {
        return 0.0;
    }
    let dim = rows[0].1.len();
    let weight: Vec<f64> = blocks
        .iter()
        .flat_map(|&b| std::iter::repeat_n(1.0 / b as f64, b))
        .chain(std::iter::repeat(1.0))
        .take(dim)
        .collect();
    let mut hits = 0;
    for fold in 0..folds {
        let train: Vec<&(usize, Vec<f64>)> =
            rows.iter().enumerate().filter(|(i, _)| i % folds != fold).map(|(_, r)| r).collect();
        if train.is_empty() {
            continue;
        }
        let n = train.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|d| train.iter().map(|r| r.1[d]).sum::<f64>() / n).collect();
        let sd: Vec<f64> = (0..dim)
            .map(|d| (train.iter().map(|r| (r.1[d] - mean[d]).powi(2)).sum::<f64>() / n).sqrt().max(1e-9))
            .collect();
        let z = |f: &[f64]| -> Vec<f64> { f.iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect() };
        let mut centroids: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
        for (c, f) in &train {
            let e = centroids.entry(*c).or_insert_with(|| (vec![0.0; dim], 0));
            e.0.iter_mut().zip(z(f)).for_each(|(a, b)| *a += b);
            e.1 += 1;
        }
        for (c, f) in rows.iter().enumerate().filter(|(i, _)| i % folds == fold).map(|(_, r)| r) {
            let zf = z(f);
            let best = centroids
                .iter()
                .map(|(class, (s, k))| {
                    let d: f64 = s
                        .iter()
                        .zip(&zf)
                        .zip(&weight)
                        .map(|((s, v), w)| w * (s / *k as f64 - v).powi(2))
                        .sum();
                    (d, *class)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            hits += usize::from(best.is_some_and(|b| b.1 == *c));
        }
    }
    hits as f64 / rows.len() as f64
}

const ORACLE_FOLDS: usize = 5;

fn ambiguity_report(features: &[(usize, Vec<f64>, Vec<f64>)], pair: (usize, usize)) -> AmbiguityReport {
    let rows = features.iter().filter(|r| r.0 == pair.0 || r.0 == pair.1);
    let human: Vec<(usize, Vec<f64>)> = rows.clone().map(|r| (r.0, r.1.clone())).collect();
    let both: Vec<(usize, Vec<f64>)> = rows.map(|r| (r.0, [r.1.as_slice(), &r.2].concat())).collect();
    let blocks = features.first().map_or(vec![], |f| vec![f.1.len(), f.2.len()]);
    AmbiguityReport {
        pair,
        human_only: nearest_centroid_accuracy(&human, &blocks[..1.min(blocks.len())], ORACLE_FOLDS),
        object_aware: nearest_centroid_accuracy(&both, &blocks, ORACLE_FOLDS),
    }
}
