//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use keynet::eval::{ActorPrediction, GroundTruth};
use keynet::geometry::{BinaryMask, Pixel, Point};
use keynet::scene::{HumanTrack, Keypoint, SceneConfig, SceneSequence, TokenizedScene};
use keynet::tracking::{iou, BBox};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random scene within `cfg`: random person/object counts, random validity.
pub fn random_scene<R: Rng>(cfg: &SceneConfig, rng: &mut R) -> SceneSequence {
    let width = rng.random_range(16.0..640.0);
    let height = rng.random_range(16.0..480.0);
    let mut s = SceneSequence::empty(width, height, cfg.frames);
    s.keyframe = rng.random_range(1..=cfg.frames);
    let point = |rng: &mut R| {
        if rng.random_bool(0.8) {
            // occasionally out of frame to exercise clamping
            Keypoint::new(
                rng.random_range(-0.1 * width..1.1 * width),
                rng.random_range(-0.1 * height..1.1 * height),
            )
        } else {
            Keypoint::INVALID
        }
    };
    for _ in 0..rng.random_range(0..=cfg.persons) {
        let joints = (0..cfg.frames)
            .map(|_| (0..cfg.joints).map(|_| point(rng)).collect())
            .collect();
        s.humans.push(HumanTrack {
            joints,
            keyframe_box: None,
            labels: vec![],
        });
    }
    for _ in 0..rng.random_range(0..=cfg.objects) {
        s.objects.push((0..cfg.object_points).map(|_| point(rng)).collect());
    }
    s
}

pub fn random_config<R: Rng>(rng: &mut R) -> SceneConfig {
    SceneConfig {
        grid_width: rng.random_range(1..40),
        grid_height: rng.random_range(1..30),
        frames: rng.random_range(1..6),
        persons: rng.random_range(1..4),
        objects: rng.random_range(0..3),
        joints: rng.random_range(1..18),
        object_points: rng.random_range(1..9),
    }
}

fn oracle_cell(v: f64, extent: f64, cells: usize) -> usize {
    // count the grid lines at or left of v, clamped to the border cells
    let mut c = 1;
    for i in 1..cells {
        if v >= extent * i as f64 / cells as f64 {
            c = i + 1;
        }
    }
    c
}

/// Brute-force tokenization: decodes each flat index into (person, frame,
/// joint) or (object, point) and applies the per-token formulas directly.
pub fn oracle_tokens(s: &SceneSequence, cfg: &SceneConfig) -> TokenizedScene {
    let human_len = cfg.persons * cfg.frames * cfg.joints;
    let len = human_len + cfg.objects * cfg.object_points;
    let mut out = TokenizedScene::padding(len);
    for idx in 0..len {
        let (kp, ty, seg, inst) = if idx < human_len {
            let n = idx / (cfg.frames * cfg.joints);
            let t = (idx / cfg.joints) % cfg.frames;
            let k = idx % cfg.joints;
            let kp = s.humans.get(n).map(|h| h.joints[t][k]);
            (kp, k + 1, t + 1, n + 1)
        } else {
            let r = idx - human_len;
            let j = r / cfg.object_points;
            let p = r % cfg.object_points;
            let kp = s.objects.get(j).map(|o| o[p]);
            (kp, cfg.joints + p + 1, s.keyframe, cfg.persons + j + 1)
        };
        if let Some(kp) = kp.filter(|k| k.valid) {
            let cx = oracle_cell(kp.x, s.width, cfg.grid_width);
            let cy = oracle_cell(kp.y, s.height, cfg.grid_height);
            out.position[idx] = (cy - 1) * cfg.grid_width + cx;
            out.token_type[idx] = ty;
            out.segment[idx] = seg;
            out.instance[idx] = inst;
            out.mask[idx] = true;
        }
    }
    out
}

/// Checks every token range and the shared-padding rule.
pub fn check_token_ranges(t: &TokenizedScene, cfg: &SceneConfig) -> Result<(), String> {
    for i in 0..t.len() {
        let ids = [t.position[i], t.token_type[i], t.segment[i], t.instance[i]];
        if !t.mask[i] {
            if ids != [0; 4] {
                return Err(format!("padding token {i} has ids {ids:?}"));
            }
            continue;
        }
        let bounds = [
            cfg.grid_width * cfg.grid_height,
            cfg.joints + cfg.object_points,
            cfg.frames,
            cfg.persons + cfg.objects,
        ];
        for (v, hi) in ids.iter().zip(bounds) {
            if *v < 1 || *v > hi {
                return Err(format!("token {i}: id {v} outside [1, {hi}]"));
            }
        }
    }
    Ok(())
}

/// Random rectangles, unions and blobby noise, reduced to one 8-connected
/// component with every enclosed background region filled.
pub fn random_hole_free_mask(rng: &mut ChaCha8Rng) -> (BinaryMask, Pixel) {
    loop {
        let w = rng.random_range(1..=32);
        let h = rng.random_range(1..=32);
        let mut m = BinaryMask::empty(w, h).unwrap();
        match rng.random_range(0..3) {
            0 | 1 => {
                let rects = if rng.random_bool(0.5) { 1 } else { rng.random_range(2..5) };
                for _ in 0..rects {
                    let x0 = rng.random_range(0..w);
                    let y0 = rng.random_range(0..h);
                    let x1 = rng.random_range(x0..w);
                    let y1 = rng.random_range(y0..h);
                    for y in y0..=y1 {
                        for x in x0..=x1 {
                            m.set(Pixel::new(x as i64, y as i64), true);
                        }
                    }
                }
            }
            _ => {
                let density = rng.random_range(0.3..0.8);
                for y in 0..h {
                    for x in 0..w {
                        if rng.random_bool(density) {
                            m.set(Pixel::new(x as i64, y as i64), true);
                        }
                    }
                }
            }
        }
        let Some(seed) = m.first_foreground() else { continue };
        let comp = fill_holes(&m.component(seed).unwrap());
        return (comp, seed);
    }
}

pub fn fill_holes(m: &BinaryMask) -> BinaryMask {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let mut outside = BinaryMask::empty(m.width() + 2, m.height() + 2).unwrap();
    let mut stack = vec![Pixel::new(-1, -1)];
    outside.set(Pixel::new(0, 0), true);
    while let Some(p) = stack.pop() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let q = Pixel::new(p.x + dx, p.y + dy);
            if q.x < -1 || q.y < -1 || q.x > w || q.y > h {
                continue;
            }
            let shifted = Pixel::new(q.x + 1, q.y + 1);
            if !m.get(q) && !outside.get(shifted) {
                outside.set(shifted, true);
                stack.push(q);
            }
        }
    }
    let mut out = m.clone();
    for y in 0..h {
        for x in 0..w {
            if !outside.get(Pixel::new(x + 1, y + 1)) {
                out.set(Pixel::new(x, y), true);
            }
        }
    }
    out
}

/// Enumerates every score threshold: at each one, re-runs matching on the
/// detections above it and records (recall, precision). AP is the sum over
/// recall increments of the best precision at that recall or beyond.
pub fn oracle_ap(preds: &[ActorPrediction], gts: &[GroundTruth], class: usize) -> Option<f64> {
    let positives: Vec<&GroundTruth> = gts.iter().filter(|g| g.labels.contains(&class)).collect();
    if positives.is_empty() {
        return None;
    }
    let mut thresholds: Vec<f64> = preds.iter().map(|p| p.scores[class]).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    let mut points = Vec::new();
    for &tau in &thresholds {
        let mut kept: Vec<&ActorPrediction> = preds.iter().filter(|p| p.scores[class] >= tau).collect();
        kept.sort_by(|a, b| b.scores[class].total_cmp(&a.scores[class]));
        let mut used = vec![false; positives.len()];
        let mut tp = 0;
        for p in &kept {
            let cand = (0..positives.len())
                .filter(|&g| !used[g] && positives[g].frame == p.frame)
                .map(|g| (g, iou(&p.bbox, &positives[g].bbox)))
                .filter(|&(_, o)| o >= 0.5)
                .fold(None, |best: Option<(usize, f64)>, (g, o)| match best {
                    Some((_, bo)) if bo >= o => best,
                    _ => Some((g, o)),
                });
            if let Some((g, _)) = cand {
                used[g] = true;
                tp += 1;
            }
        }
        points.push((tp as f64 / positives.len() as f64, tp as f64 / kept.len() as f64));
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    let mut recalls: Vec<f64> = points.iter().map(|p| p.0).collect();
    recalls.dedup();
    for r in recalls {
        let best = points
            .iter()
            .filter(|p| p.0 >= r)
            .map(|p| p.1)
            .fold(0.0, f64::max);
        ap += (r - prev) * best;
        prev = r;
    }
    Some(ap)
}

pub fn random_box(rng: &mut ChaCha8Rng) -> BBox {
    // coarse positions so overlaps above and below 0.5 both occur
    let x = rng.random_range(0..4) as f64 * 4.0;
    let y = rng.random_range(0..2) as f64 * 4.0;
    let w = rng.random_range(6..12) as f64;
    BBox::new(x, y, x + w, y + 10.0).unwrap()
}

/// Arc coordinate of `p` along the closed polyline, with its distance to it.
pub fn locate(p: Point, pts: &[Point]) -> (f64, f64) {
    let n = pts.len();
    let mut best = (f64::INFINITY, 0.0);
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
        let (qx, qy) = (a.x + t * dx, a.y + t * dy);
        let d = (p.x - qx).hypot(p.y - qy);
        // the first segment that contains the point wins
        if d < best.0 - 1e-12 {
            best = (d, acc + t * len2.sqrt());
        }
        acc += len2.sqrt();
    }
    (best.1, best.0)
}
