use std::collections::BTreeMap;
use std::path::Path;

use super::format::ClipRecord;
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::{object_keypoints, BinaryMask};
use crate::scene::{HumanTrack, Keypoint, SceneConfig, SceneSequence};
use crate::tracking::{iou, link_from_keyframe, select_top_n, subsample_frames, BBox, Detection};

/// Settings that turn a raw clip into a scene sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub iou_threshold: f64,
    pub target_fps: f64,
    pub scene: SceneConfig,
}

/// Resolves the mask paths named in object records.
pub trait MaskSource {
    fn mask(&self, path: &str) -> Result<BinaryMask>;
}

/// Masks read from PGM files relative to a directory.
pub struct MaskDir<'a>(pub &'a Path);

impl MaskSource for MaskDir<'_> {
    fn mask(&self, path: &str) -> Result<BinaryMask> {
        BinaryMask::read_pgm(self.0.join(path))
    }
}

impl MaskSource for BTreeMap<String, BinaryMask> {
    fn mask(&self, path: &str) -> Result<BinaryMask> {
        self.get(path)
            .cloned()
            .ok_or_else(|| Error::Invalid(format!("no mask `{path}`")))
    }
}

fn bbox(b: &[f64; 4]) -> Result<BBox> {
    BBox::new(b[0], b[1], b[2], b[3])
}

pub fn clip_detections(clip: &ClipRecord) -> Result<Vec<Vec<Detection>>> {
    clip.frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            f.persons
                .iter()
                .map(|p| {
                    Ok(Detection {
                        frame: t,
                        bbox: bbox(&p.bbox)?,
                        score: p.score,
                        joints: p
                            .joints
                            .iter()
                            .map(|j| Keypoint::from_estimate(j[0], j[1], j[2]))
                            .collect(),
                    })
                })
                .collect()
        })
        .collect()
}

/// Tracks, keeps the `N` most confident tracklets, sub-samples to the target
/// rate and cuts a `T`-frame window whose keyframe slot is `ceil(T/2)`.
/// Actor labels come from the annotated box each keyframe box overlaps most
/// (IOU at least the tracking threshold).
pub fn track_clip(clip: &ClipRecord, cfg: &PipelineConfig) -> Result<SceneSequence> {
    let sc = &cfg.scene;
    let frames = clip_detections(clip)?;
    let tracks = link_from_keyframe(&frames, clip.keyframe, cfg.iou_threshold)?;
    let tracks = select_top_n(tracks, sc.persons)?;
    let sub = subsample_frames(&tracks, frames.len(), clip.fps, cfg.target_fps, clip.keyframe)?;
    let mut scene = SceneSequence::empty(clip.width, clip.height, sc.frames);
    let offset = sub.keyframe as isize - scene.keyframe as isize;
    let mut taken = vec![false; clip.actors.len()];
    for t in sub.tracklets.iter().filter(|t| !t.is_empty()) {
        let joints = (0..sc.frames)
            .map(|s| {
                let kept = s as isize + offset;
                let entry = usize::try_from(kept).ok().and_then(|k| t.entries.get(k)).and_then(Option::as_ref);
                match entry {
                    Some(e) if e.joints.len() == sc.joints => Ok(e.joints.clone()),
                    Some(e) => Err(Error::Shape(format!(
                        "detection has {} joints, scene expects {}",
                        e.joints.len(),
                        sc.joints
                    ))),
                    None => Ok(vec![Keypoint::INVALID; sc.joints]),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let keyframe_box = t.entries[sub.keyframe - 1].as_ref().map(|e| e.bbox);
        let mut labels = Vec::new();
        if let Some(kb) = keyframe_box {
            let best = clip
                .actors
                .iter()
                .enumerate()
                .filter(|(a, _)| !taken[*a])
                .filter_map(|(a, r)| bbox(&r.bbox).ok().map(|b| (a, iou(&kb, &b))))
                .filter(|(_, o)| *o >= cfg.iou_threshold)
                .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
            if let Some((a, _)) = best {
                taken[a] = true;
                labels = clip.actors[a].labels.clone();
            }
        }
        scene.humans.push(HumanTrack {
            joints,
            keyframe_box,
            labels,
        });
    }
    scene.label = clip.label;
    Ok(scene)
}

/// Contour keypoints of the first `M` objects, `k_o` each.
pub fn clip_objects(clip: &ClipRecord, cfg: &SceneConfig, masks: &dyn MaskSource) -> Result<Vec<Vec<Keypoint>>> {
    clip.objects
        .iter()
        .take(cfg.objects)
        .map(|o| {
            let points: Vec<[f64; 2]> = match (&o.mask, &o.keypoints) {
                (Some(path), _) => {
                    let mask = masks.mask(path)?;
                    let seed = mask
                        .first_foreground()
                        .ok_or_else(|| Error::Invalid(format!("mask `{path}` is empty")))?;
                    object_keypoints(&mask, seed, cfg.object_points)?
                        .iter()
                        .map(|p| [p.x, p.y])
                        .collect()
                }
                (None, Some(k)) => k.clone(),
                (None, None) => return Err(Error::Invalid("object without mask or keypoints".into())),
            };
            let mut out: Vec<Keypoint> = points.iter().map(|p| Keypoint::new(p[0], p[1])).collect();
            out.resize(cfg.object_points, Keypoint::INVALID);
            out.truncate(cfg.object_points);
            Ok(out)
        })
        .collect()
}

/// Full raw-clip to scene-sequence conversion.
pub fn clip_to_scene(clip: &ClipRecord, cfg: &PipelineConfig, masks: &dyn MaskSource) -> Result<SceneSequence> {
    let mut scene = track_clip(clip, cfg)?;
    scene.objects = clip_objects(clip, &cfg.scene, masks)?;
    Ok(scene)
}

/// Annotated keyframe actors of one clip, tagged with frame index `frame`.
pub fn clip_ground_truth(clip: &ClipRecord, frame: usize) -> Result<Vec<GroundTruth>> {
    clip.actors
        .iter()
        .map(|a| {
            Ok(GroundTruth {
                frame,
                bbox: bbox(&a.bbox)?,
                labels: a.labels.clone(),
            })
        })
        .collect()
}
