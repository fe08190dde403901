//! Top-1 accuracy and keyframe detection AP.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{classify, HeadMode, Model, Prediction};
use crate::scene::{tokenize_scene, SceneSequence};
use crate::tracking::{iou, BBox};

pub const FRAME_AP_IOU: f64 = 0.5;

/// One scored actor box on a clip's keyframe.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorPrediction {
    /// Clip (keyframe) the box belongs to; matching never crosses frames.
    pub frame: usize,
    pub bbox: BBox,
    /// Per-class scores in `[0, 1]`.
    pub scores: Vec<f64>,
}

/// One annotated actor on a keyframe.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frame: usize,
    pub bbox: BBox,
    pub labels: Vec<usize>,
}

pub fn top1_accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::Invalid("accuracy of no predictions".into()));
    }
    if predicted.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Area under the all-point interpolated precision/recall curve, given the
/// TP flags of detections in descending score order.
pub fn average_precision(tp: &[bool], positives: usize) -> f64 {
    if positives == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (i, &t) in tp.iter().enumerate() {
        hits += usize::from(t);
        precision.push(hits as f64 / (i + 1) as f64);
        recall.push(hits as f64 / positives as f64);
    }
    // precision envelope from the right
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

/// Frame-AP of class `class`: predictions in descending score order are
/// matched greedily to the highest-IOU unmatched ground truth of that class on
/// the same frame (ties go to the lower ground-truth index). Returns `None`
/// when the class has no ground truth.
pub fn frame_ap(
    predictions: &[ActorPrediction],
    truth: &[GroundTruth],
    class: usize,
    iou_threshold: f64,
) -> Option<f64> {
    let gts: Vec<&GroundTruth> = truth.iter().filter(|g| g.labels.contains(&class)).collect();
    if gts.is_empty() {
        return None;
    }
    let mut order: Vec<(usize, f64)> = predictions
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.scores.get(class).map(|&s| (i, s)))
        .collect();
    // stable: equal scores keep input order
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut matched = vec![false; gts.len()];
    let mut tp = Vec::with_capacity(order.len());
    for (i, _) in order {
        let p = &predictions[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if matched[g] || gt.frame != p.frame {
                continue;
            }
            let o = iou(&p.bbox, &gt.bbox);
            if o >= iou_threshold && best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        match best {
            Some((g, _)) => {
                matched[g] = true;
                tp.push(true);
            }
            None => tp.push(false),
        }
    }
    Some(average_precision(&tp, gts.len()))
}

/// Unweighted mean over the classes that have ground truth.
pub fn mean_ap(per_class: &[Option<f64>]) -> Result<f64> {
    let aps: Vec<f64> = per_class.iter().flatten().copied().collect();
    if aps.is_empty() {
        return Err(Error::Invalid("no class has ground truth".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Per-class APs plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    pub per_class: Vec<Option<f64>>,
    pub map: f64,
}

pub fn frame_map(
    predictions: &[ActorPrediction],
    truth: &[GroundTruth],
    classes: usize,
    iou_threshold: f64,
) -> Result<MapReport> {
    let per_class: Vec<Option<f64>> = (0..classes)
        .map(|c| frame_ap(predictions, truth, c, iou_threshold))
        .collect();
    let map = mean_ap(&per_class)?;
    Ok(MapReport { per_class, map })
}

impl MapReport {
    /// `class,ap` lines for classes with ground truth, then `mAP,<value>`.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("class,ap\n");
        for (c, ap) in self.per_class.iter().enumerate() {
            if let Some(ap) = ap {
                let name = names.get(c).cloned().unwrap_or_else(|| c.to_string());
                writeln!(out, "{name},{ap:.6}").expect("write to string");
            }
        }
        writeln!(out, "mAP,{:.6}", self.map).expect("write to string");
        out
    }
}

/// Scenes per inference batch in the model-driven helpers.
pub const EVAL_BATCH: usize = 16;

/// Logit rows of `scenes`, `[B, C]` in video mode and `[B·N, C]` in actor
/// mode, each paired with its validity flag.
pub fn scene_logits(model: &Model, scenes: &[SceneSequence]) -> Result<Vec<(Vec<f64>, bool)>> {
    let c = model.config.classes;
    let mut rows = Vec::new();
    for chunk in scenes.chunks(EVAL_BATCH) {
        let tokens = chunk
            .iter()
            .map(|s| tokenize_scene(s, &model.config.scene))
            .collect::<Result<Vec<_>>>()?;
        let out = model.predict(&tokens)?;
        for (r, &valid) in out.values.data().chunks(c).zip(&out.valid) {
            rows.push((r.to_vec(), valid));
        }
    }
    Ok(rows)
}

/// Argmax class per scene of a video-mode model.
pub fn predict_classes(model: &Model, scenes: &[SceneSequence]) -> Result<Vec<usize>> {
    if model.config.head != HeadMode::Video {
        return Err(Error::Invalid("class prediction needs a video-mode model".into()));
    }
    Ok(scene_logits(model, scenes)?
        .iter()
        .map(|(r, _)| match classify(r, HeadMode::Video) {
            Prediction::Class { index, .. } => index,
            Prediction::Scores(_) => unreachable!("video mode yields classes"),
        })
        .collect())
}

/// Top-1 accuracy of a video-mode model on labeled scenes.
pub fn model_top1(model: &Model, scenes: &[SceneSequence]) -> Result<f64> {
    let labels = scenes
        .iter()
        .map(|s| s.label.ok_or_else(|| Error::Invalid("scene without a video label".into())))
        .collect::<Result<Vec<_>>>()?;
    top1_accuracy(&predict_classes(model, scenes)?, &labels)
}

/// Scored keyframe boxes of an actor-mode model. Scene `i` becomes frame `i`;
/// actors without a keyframe box or without valid joints are skipped.
pub fn actor_predictions(model: &Model, scenes: &[SceneSequence]) -> Result<Vec<ActorPrediction>> {
    if model.config.head != HeadMode::Actor {
        return Err(Error::Invalid("actor predictions need an actor-mode model".into()));
    }
    let n = model.config.scene.persons;
    let rows = scene_logits(model, scenes)?;
    let mut out = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        for (p, h) in s.humans.iter().enumerate().take(n) {
            let (logits, valid) = &rows[i * n + p];
            if let (Some(bbox), true) = (h.keyframe_box, *valid) {
                if let Prediction::Scores(scores) = classify(logits, HeadMode::Actor) {
                    out.push(ActorPrediction { frame: i, bbox, scores });
                }
            }
        }
    }
    Ok(out)
}
