use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::synth::SynthSpec;
use crate::error::{Error, Result};
use crate::scene::{HumanTrack, Keypoint, SceneConfig, SceneSequence, TokenizedScene};
use crate::tracking::BBox;

/// Dataset-wide facts: class names, joints per person and the left/right swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub classes: Vec<String>,
    pub joints: usize,
    /// `flip_perm[k]` is the joint that joint `k` becomes under a mirror.
    pub flip_perm: Vec<usize>,
}

/// One person detection: `[x1, y1, x2, y2]`, detector score and
/// `[x, y, confidence]` per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonRecord {
    pub bbox: [f64; 4],
    pub score: f64,
    pub joints: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub persons: Vec<PersonRecord>,
}

/// Keyframe object: a PGM mask path (relative to the data file) or
/// precomputed contour keypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Vec<[f64; 2]>>,
}

/// Annotated actor on the keyframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorRecord {
    pub bbox: [f64; 4],
    pub labels: Vec<usize>,
}

/// Raw clip: per-frame detections plus labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipRecord {
    pub id: String,
    pub width: f64,
    pub height: f64,
    pub fps: f64,
    /// 0-based index into `frames`.
    pub keyframe: usize,
    pub frames: Vec<FrameRecord>,
    pub objects: Vec<ObjectRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default)]
    pub actors: Vec<ActorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanRecord {
    /// `[T][k_h]` of `[x, y, valid]` with valid 1 or 0.
    pub joints: Vec<Vec<[f64; 3]>>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub keyframe_box: Option<[f64; 4]>,
    pub labels: Vec<usize>,
}

/// Tracked scene sequence, ready for tokenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub id: String,
    pub width: f64,
    pub height: f64,
    pub frames: usize,
    /// 1-based keyframe slot.
    pub keyframe: usize,
    pub humans: Vec<HumanRecord>,
    /// `[M][k_o]` of `[x, y, valid]`.
    pub objects: Vec<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

/// Four token streams plus the extents they were produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokensRecord {
    pub id: String,
    pub grid_width: usize,
    pub grid_height: usize,
    pub frames: usize,
    pub persons: usize,
    pub objects: usize,
    pub joints: usize,
    pub object_points: usize,
    pub position: Vec<usize>,
    #[serde(rename = "type")]
    pub token_type: Vec<usize>,
    pub segment: Vec<usize>,
    pub instance: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default)]
    pub actor_labels: Vec<Vec<usize>>,
}

/// Object contour keypoints extracted from a mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointsRecord {
    pub mask: String,
    pub points: Vec<[f64; 2]>,
}

/// One line of a `.knd` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Clip(ClipRecord),
    Scene(SceneRecord),
    Tokens(TokensRecord),
    Keypoints(KeypointsRecord),
    Synth(SynthSpec),
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => write!(out, "{u}").expect("write to string"),
            (None, Some(i)) => write!(out, "{i}").expect("write to string"),
            _ => write!(out, "{:.6}", n.as_f64().unwrap_or(f64::NAN)).expect("write to string"),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's default map is ordered by key
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(out, item);
            }
            out.push('}');
        }
    }
}

/// Canonical line: sorted keys, no spaces, integers verbatim, reals with six
/// decimals.
pub fn canonical_line(record: &Record) -> String {
    let value = serde_json::to_value(record).expect("records serialize to JSON");
    let mut out = String::new();
    write_value(&mut out, &value);
    out
}

pub fn write_knd(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&canonical_line(r));
        out.push('\n');
    }
    out
}

pub fn save_knd(path: &Path, records: &[Record]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, write_knd(records)).map_err(|e| Error::io(path, e))
}

fn check_box(b: &[f64; 4], what: &str) -> std::result::Result<(), String> {
    if b.iter().all(|v| v.is_finite()) && b[0] < b[2] && b[1] < b[3] {
        Ok(())
    } else {
        Err(format!("{what} has degenerate box {b:?}"))
    }
}

fn check_labels(labels: &[usize], classes: Option<usize>, what: &str) -> std::result::Result<(), String> {
    match (classes, labels.iter().find(|&&l| Some(l) >= classes)) {
        (Some(c), Some(l)) => Err(format!("{what} label {l} outside {c} declared classes")),
        _ => Ok(()),
    }
}

fn validate(record: &Record, header: Option<&Header>) -> std::result::Result<(), String> {
    let joints = header.map(|h| h.joints);
    let classes = header.map(|h| h.classes.len());
    match record {
        Record::Header(h) => {
            let mut seen = vec![false; h.joints];
            if h.flip_perm.len() != h.joints
                || h.flip_perm.iter().any(|&k| k >= h.joints || std::mem::replace(&mut seen[k], true))
            {
                return Err(format!("flip_perm is not a permutation of {} joints", h.joints));
            }
            if h.classes.is_empty() {
                return Err("header declares no classes".into());
            }
        }
        Record::Clip(c) => {
            if !(c.width > 0.0 && c.height > 0.0 && c.fps > 0.0) {
                return Err(format!("clip `{}` needs positive width, height and fps", c.id));
            }
            if c.keyframe >= c.frames.len() {
                return Err(format!(
                    "clip `{}` keyframe {} outside {} frames",
                    c.id,
                    c.keyframe,
                    c.frames.len()
                ));
            }
            for (t, f) in c.frames.iter().enumerate() {
                for (i, p) in f.persons.iter().enumerate() {
                    let what = format!("frame {t} person {i}");
                    check_box(&p.bbox, &what)?;
                    if let Some(k) = joints.filter(|&k| k != p.joints.len()) {
                        return Err(format!("{what} has {} joints, header declares {k}", p.joints.len()));
                    }
                    if p.joints.iter().flatten().any(|v| !v.is_finite()) {
                        return Err(format!("{what} has a non-finite joint"));
                    }
                }
            }
            for (j, o) in c.objects.iter().enumerate() {
                if o.mask.is_some() == o.keypoints.is_some() {
                    return Err(format!("object {j} needs exactly one of `mask` or `keypoints`"));
                }
            }
            check_labels(c.label.as_slice(), classes, "clip")?;
            for (i, a) in c.actors.iter().enumerate() {
                check_box(&a.bbox, &format!("actor {i}"))?;
                check_labels(&a.labels, classes, &format!("actor {i}"))?;
            }
        }
        Record::Scene(s) => {
            if s.keyframe == 0 || s.keyframe > s.frames {
                return Err(format!("keyframe {} outside 1..={}", s.keyframe, s.frames));
            }
            for (n, h) in s.humans.iter().enumerate() {
                if h.joints.len() != s.frames {
                    return Err(format!("human {n} has {} frames, scene has {}", h.joints.len(), s.frames));
                }
                if let Some(k) = joints {
                    if let Some(f) = h.joints.iter().position(|f| f.len() != k) {
                        return Err(format!(
                            "human {n} frame {f} has {} joints, header declares {k}",
                            h.joints[f].len()
                        ));
                    }
                }
                check_labels(&h.labels, classes, &format!("human {n}"))?;
            }
            check_labels(s.label.as_slice(), classes, "scene")?;
        }
        Record::Tokens(t) => {
            let len = t.persons * t.frames * t.joints + t.objects * t.object_points;
            for (name, s) in [
                ("position", &t.position),
                ("type", &t.token_type),
                ("segment", &t.segment),
                ("instance", &t.instance),
            ] {
                if s.len() != len {
                    return Err(format!("`{name}` has {} tokens, extents give {len}", s.len()));
                }
            }
        }
        Record::Keypoints(_) | Record::Synth(_) => {}
    }
    Ok(())
}

/// Parses `.knd` text. Blank lines are skipped. A header line, when present,
/// constrains the records after it. Errors name the 1-based line.
pub fn parse_knd(text: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let mut header: Option<Header> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        validate(&record, header.as_ref()).map_err(|m| Error::parse(i + 1, m))?;
        if let Record::Header(h) = &record {
            header = Some(h.clone());
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_knd(path: &Path) -> Result<Vec<Record>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_knd(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Header and clip records of a file.
pub fn load_clips(path: &Path) -> Result<(Option<Header>, Vec<ClipRecord>)> {
    let mut header = None;
    let mut clips = Vec::new();
    for r in read_knd(path)? {
        match r {
            Record::Header(h) => header = Some(h),
            Record::Clip(c) => clips.push(c),
            _ => {}
        }
    }
    Ok((header, clips))
}

/// Rounds to the six decimals the canonical form keeps, so that in-memory
/// data equals what a reload produces.
pub fn round6(v: f64) -> f64 {
    let r = format!("{v:.6}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn kp_triplet(k: &Keypoint) -> [f64; 3] {
    if k.valid {
        [round6(k.x), round6(k.y), 1.0]
    } else {
        [0.0, 0.0, 0.0]
    }
}

fn kp_from_triplet(v: &[f64; 3]) -> Keypoint {
    if v[2] > 0.0 {
        Keypoint::new(v[0], v[1])
    } else {
        Keypoint::INVALID
    }
}

fn bbox_array(b: &BBox) -> [f64; 4] {
    [b.x1, b.y1, b.x2, b.y2].map(round6)
}

impl SceneRecord {
    /// Coordinates are rounded to the six decimals the file keeps.
    pub fn from_scene(id: &str, s: &SceneSequence) -> Self {
        Self {
            id: id.to_string(),
            width: s.width,
            height: s.height,
            frames: s.frames,
            keyframe: s.keyframe,
            humans: s
                .humans
                .iter()
                .map(|h| HumanRecord {
                    joints: h
                        .joints
                        .iter()
                        .map(|f| f.iter().map(kp_triplet).collect())
                        .collect(),
                    keyframe_box: h.keyframe_box.as_ref().map(bbox_array),
                    labels: h.labels.clone(),
                })
                .collect(),
            objects: s
                .objects
                .iter()
                .map(|o| o.iter().map(kp_triplet).collect())
                .collect(),
            label: s.label,
        }
    }

    pub fn to_scene(&self) -> Result<SceneSequence> {
        let humans = self
            .humans
            .iter()
            .map(|h| {
                Ok(HumanTrack {
                    joints: h
                        .joints
                        .iter()
                        .map(|f| f.iter().map(kp_from_triplet).collect())
                        .collect(),
                    keyframe_box: h
                        .keyframe_box
                        .map(|b| BBox::new(b[0], b[1], b[2], b[3]))
                        .transpose()?,
                    labels: h.labels.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneSequence {
            width: self.width,
            height: self.height,
            frames: self.frames,
            humans,
            objects: self
                .objects
                .iter()
                .map(|o| o.iter().map(kp_from_triplet).collect())
                .collect(),
            keyframe: self.keyframe,
            label: self.label,
        })
    }
}

impl TokensRecord {
    pub fn new(id: &str, cfg: &SceneConfig, t: &TokenizedScene, scene: &SceneSequence) -> Self {
        Self {
            id: id.to_string(),
            grid_width: cfg.grid_width,
            grid_height: cfg.grid_height,
            frames: cfg.frames,
            persons: cfg.persons,
            objects: cfg.objects,
            joints: cfg.joints,
            object_points: cfg.object_points,
            position: t.position.clone(),
            token_type: t.token_type.clone(),
            segment: t.segment.clone(),
            instance: t.instance.clone(),
            label: scene.label,
            actor_labels: scene.humans.iter().map(|h| h.labels.clone()).collect(),
        }
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            grid_width: self.grid_width,
            grid_height: self.grid_height,
            frames: self.frames,
            persons: self.persons,
            objects: self.objects,
            joints: self.joints,
            object_points: self.object_points,
        }
    }

    /// Streams with the validity mask restored (valid tokens have position ≥ 1).
    pub fn tokens(&self) -> TokenizedScene {
        TokenizedScene {
            position: self.position.clone(),
            token_type: self.token_type.clone(),
            segment: self.segment.clone(),
            instance: self.instance.clone(),
            mask: self.position.iter().map(|&p| p != 0).collect(),
        }
    }
}
