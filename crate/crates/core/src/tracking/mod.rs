//! Greedy IOU linking of per-frame person detections into tracklets,
//! top-N actor selection, and frame-rate sub-sampling.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scene::Keypoint;

/// Axis-aligned box in pixels, `x1 < x2` and `y1 < y2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if !(x1 < x2 && y1 < y2) {
            return Err(Error::Invalid(format!(
                "degenerate box ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }

    /// Tight box around valid keypoints, padded by `margin` pixels.
    pub fn around(points: &[Keypoint], margin: f64) -> Option<Self> {
        let valid = points.iter().filter(|k| k.valid);
        let (mut x1, mut y1, mut x2, mut y2) = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        let mut any = false;
        for k in valid {
            any = true;
            x1 = x1.min(k.x);
            y1 = y1.min(k.y);
            x2 = x2.max(k.x);
            y2 = y2.max(k.y);
        }
        let m = margin.max(0.5);
        any.then(|| Self {
            x1: x1 - m,
            y1: y1 - m,
            x2: x2 + m,
            y2: y2 + m,
        })
    }
}

/// Intersection over union.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: usize,
    pub bbox: BBox,
    pub score: f64,
    pub joints: Vec<Keypoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEntry {
    pub bbox: BBox,
    pub score: f64,
    pub joints: Vec<Keypoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: usize,
    /// One slot per frame of the clip.
    pub entries: Vec<Option<TrackEntry>>,
    /// Mean score of member detections.
    pub confidence: f64,
}

impl Tracklet {
    pub fn len(&self) -> usize {
        self.entries.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn refresh_confidence(&mut self) {
        let scores: Vec<f64> = self.entries.iter().flatten().map(|e| e.score).collect();
        self.confidence = if scores.is_empty() {
            0.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        };
    }
}

/// Links detections frame to frame in the given order. Tracks alive at the
/// previous visited frame compete for the current frame's detections.
fn link_in_order(
    frames: &[Vec<Detection>],
    order: impl Iterator<Item = usize>,
    tracks: &mut Vec<Tracklet>,
    mut previous: Option<usize>,
    iou_threshold: f64,
) {
    let frame_count = frames.len();
    for f in order {
        let dets = &frames[f];
        let mut candidates = Vec::new();
        if let Some(p) = previous {
            for (ti, t) in tracks.iter().enumerate() {
                let Some(last) = &t.entries[p] else { continue };
                for (di, d) in dets.iter().enumerate() {
                    let overlap = iou(&last.bbox, &d.bbox);
                    if overlap >= iou_threshold && overlap > 0.0 {
                        candidates.push((overlap, ti, di));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    dets[b.2]
                        .score
                        .partial_cmp(&dets[a.2].score)
                        .unwrap_or(Ordering::Equal)
                })
                .then_with(|| tracks[a.1].id.cmp(&tracks[b.1].id))
                .then_with(|| a.2.cmp(&b.2))
        });
        let mut det_used = vec![false; dets.len()];
        let mut track_used = vec![false; tracks.len()];
        for (_, ti, di) in candidates {
            if det_used[di] || track_used[ti] {
                continue;
            }
            det_used[di] = true;
            track_used[ti] = true;
            tracks[ti].entries[f] = Some(entry(&dets[di]));
        }
        for (di, d) in dets.iter().enumerate() {
            if !det_used[di] {
                let mut entries = vec![None; frame_count];
                entries[f] = Some(entry(d));
                tracks.push(Tracklet {
                    id: tracks.len(),
                    entries,
                    confidence: 0.0,
                });
            }
        }
        previous = Some(f);
    }
}

fn entry(d: &Detection) -> TrackEntry {
    TrackEntry {
        bbox: d.bbox,
        score: d.score,
        joints: d.joints.clone(),
    }
}

/// Greedy forward IOU tracker over consecutive frames.
///
/// `frames[t]` holds the detections of frame `t`. For each frame, candidate
/// (track, detection) pairs with IOU at or above the threshold are matched
/// greedily by descending IOU, ties going to the higher-scoring detection and
/// then the lower track id. Unmatched detections open new tracklets.
pub fn link_detections(frames: &[Vec<Detection>], iou_threshold: f64) -> Vec<Tracklet> {
    let mut tracks = Vec::new();
    link_in_order(frames, 0..frames.len(), &mut tracks, None, iou_threshold);
    tracks.iter_mut().for_each(Tracklet::refresh_confidence);
    tracks
}

/// Links forward from the keyframe to the last frame, then backward from the
/// keyframe to the first, so keyframe detections seed the tracklets.
pub fn link_from_keyframe(
    frames: &[Vec<Detection>],
    keyframe: usize,
    iou_threshold: f64,
) -> Result<Vec<Tracklet>> {
    if keyframe >= frames.len() {
        return Err(Error::Invalid(format!(
            "keyframe {keyframe} outside {} frames",
            frames.len()
        )));
    }
    let mut tracks = Vec::new();
    link_in_order(frames, keyframe..frames.len(), &mut tracks, None, iou_threshold);
    link_in_order(
        frames,
        (0..keyframe).rev(),
        &mut tracks,
        Some(keyframe),
        iou_threshold,
    );
    tracks.iter_mut().for_each(Tracklet::refresh_confidence);
    Ok(tracks)
}

/// Keeps the `n` most confident tracklets; ties favour longer, then older ones.
pub fn select_top_n(mut tracklets: Vec<Tracklet>, n: usize) -> Result<Vec<Tracklet>> {
    if n == 0 {
        return Err(Error::Invalid("top-N selection needs n >= 1".into()));
    }
    tracklets.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.len().cmp(&a.len()))
            .then_with(|| a.id.cmp(&b.id))
    });
    tracklets.truncate(n);
    Ok(tracklets)
}

/// Tracklets restricted to a reduced frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsampled {
    pub tracklets: Vec<Tracklet>,
    /// Source frame index of each kept frame, ascending.
    pub frames: Vec<usize>,
    /// 1-based position of the keyframe among the kept frames.
    pub keyframe: usize,
    pub stride: usize,
}

/// Keeps every `round(source/target)`-th frame on the grid through the
/// keyframe and re-indexes tracklet entries to the kept frames.
pub fn subsample_frames(
    tracklets: &[Tracklet],
    frame_count: usize,
    source_fps: f64,
    target_fps: f64,
    keyframe: usize,
) -> Result<Subsampled> {
    if !(source_fps > 0.0 && target_fps > 0.0) {
        return Err(Error::Invalid(format!(
            "frame rates must be positive ({source_fps} -> {target_fps})"
        )));
    }
    let stride = (source_fps / target_fps).round();
    if stride < 1.0 {
        return Err(Error::Invalid(format!(
            "sub-sampling {source_fps} -> {target_fps} FPS gives stride {stride}"
        )));
    }
    let stride = stride as usize;
    if keyframe >= frame_count {
        return Err(Error::Invalid(format!(
            "keyframe {keyframe} outside {frame_count} frames"
        )));
    }
    let frames: Vec<usize> = (keyframe % stride..frame_count).step_by(stride).collect();
    let kf_pos = frames
        .iter()
        .position(|&f| f == keyframe)
        .expect("keyframe lies on its own grid");
    let tracklets = tracklets
        .iter()
        .map(|t| {
            let mut t = Tracklet {
                id: t.id,
                entries: frames.iter().map(|&f| t.entries.get(f).cloned().flatten()).collect(),
                confidence: t.confidence,
            };
            if t.is_empty() {
                t.confidence = 0.0;
            }
            t
        })
        .collect();
    Ok(Subsampled {
        tracklets,
        frames,
        keyframe: kf_pos + 1,
        stride,
    })
}

/// Wall-clock span in seconds covered by `frames` samples at `fps`.
pub fn temporal_footprint(frames: usize, fps: f64) -> f64 {
    frames as f64 / fps
}
