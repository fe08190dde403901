//! Command-line front end. Every subcommand reads and writes the files of the
//! owning modules; failures print one `error: ...` line and exit 1, usage
//! errors exit 2.

mod svg;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use svg::render_tokens;

use crate::data::{
    clip_ground_truth, clip_to_scene, generate_synthetic, load_clips, read_knd, save_knd,
    ClipRecord, Header, KeypointsRecord, MaskDir, PipelineConfig, Record, SceneRecord,
    TokensRecord,
};
use crate::error::{Error, Result};
use crate::eval::{actor_predictions, frame_map, model_top1, FRAME_AP_IOU};
use crate::geometry::{object_keypoints, BinaryMask};
use crate::model::{HeadMode, Model, ModelConfig};
use crate::scene::{tokenize_scene, SceneConfig, SceneSequence};
use crate::train::{gradient_check, parse_config, train_loop, TrainConfig, TrainData};

#[derive(Debug, Parser)]
#[command(name = "keynet", version, about = "Keypoint scene-sequence action recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Top1,
    Framemap,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Object contour keypoints from a PGM mask.
    Contour {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Links raw detections into scene sequences.
    Track {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Actors kept per clip (N).
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Objects kept per clip (M).
        #[arg(long, default_value_t = 0)]
        m: usize,
        /// Target frame rate.
        #[arg(long, default_value_t = 5.0)]
        fps: f64,
        /// Frames per scene (T).
        #[arg(long, default_value_t = 10)]
        frames: usize,
        /// Contour keypoints per object (k_o).
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turns scene sequences into the four token streams.
    Tokenize {
        #[arg(long = "in")]
        input: PathBuf,
        /// Position grid as `W'xH'`.
        #[arg(long, default_value = "32x24", value_parser = parse_grid)]
        grid: (usize, usize),
        /// Person slots (N); defaults to the most humans in any scene.
        #[arg(long)]
        n: Option<usize>,
        /// Object slots (M); defaults to the most objects in any scene.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generates a synthetic dataset from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains on `<data>/train.knd`, evaluating on `<data>/test.knd` if present.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scores a checkpoint on `<data>/<split>.knd`.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 5.0)]
        fps: f64,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Compares analytic and finite-difference gradients of a fresh model.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Renders one token record as SVG.
    VizTokens {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Which token record of the file to draw.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid `{s}` is not WxH"))?;
    match (w.parse::<usize>(), h.parse::<usize>()) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(format!("grid `{s}` is not WxH with positive extents")),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            // one line, whatever the error carries
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn header_of(records: &[Record]) -> Option<&Header> {
    records.iter().find_map(|r| match r {
        Record::Header(h) => Some(h),
        _ => None,
    })
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

pub fn run(command: Command, out: &mut dyn std::io::Write) -> Result<()> {
    let say = |out: &mut dyn std::io::Write, line: String| {
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
    };
    match command {
        Command::Contour { mask, k, out: path } => {
            let m = BinaryMask::read_pgm(&mask)?;
            let seed = m
                .first_foreground()
                .ok_or_else(|| Error::Invalid(format!("{} has no foreground", mask.display())))?;
            let points = object_keypoints(&m, seed, k)?;
            let rec = KeypointsRecord {
                mask: mask.display().to_string(),
                points: points.iter().map(|p| [p.x, p.y]).collect(),
            };
            save_knd(&path, &[Record::Keypoints(rec)])?;
            say(out, format!("{} keypoints -> {}", points.len(), path.display()))
        }
        Command::Track {
            input,
            iou,
            n,
            m,
            fps,
            frames,
            k,
            out: path,
        } => {
            let (header, clips) = load_clips(&input)?;
            let header = header.ok_or_else(|| Error::Invalid(format!("{} has no header", input.display())))?;
            let cfg = PipelineConfig {
                iou_threshold: iou,
                target_fps: fps,
                scene: SceneConfig {
                    grid_width: 1,
                    grid_height: 1,
                    frames,
                    persons: n,
                    objects: m,
                    joints: header.joints,
                    object_points: k,
                },
            };
            cfg.scene.validate()?;
            let masks = MaskDir(base_dir(&input));
            let mut records = vec![Record::Header(header)];
            for clip in &clips {
                let scene = clip_to_scene(clip, &cfg, &masks)?;
                records.push(Record::Scene(SceneRecord::from_scene(&clip.id, &scene)));
            }
            save_knd(&path, &records)?;
            say(out, format!("{} scenes -> {}", clips.len(), path.display()))
        }
        Command::Tokenize {
            input,
            grid,
            n,
            m,
            k,
            out: path,
        } => {
            let records = read_knd(&input)?;
            let header = header_of(&records).cloned();
            let scenes: Vec<(String, SceneSequence)> = records
                .iter()
                .filter_map(|r| match r {
                    Record::Scene(s) => Some(s.to_scene().map(|x| (s.id.clone(), x))),
                    _ => None,
                })
                .collect::<Result<_>>()?;
            let joints = match &header {
                Some(h) => h.joints,
                None => scenes
                    .iter()
                    .find_map(|(_, s)| s.humans.first().and_then(|h| h.joints.first()).map(Vec::len))
                    .unwrap_or(1),
            };
            let persons = n.unwrap_or_else(|| scenes.iter().map(|(_, s)| s.humans.len()).max().unwrap_or(1).max(1));
            let objects = m.unwrap_or_else(|| scenes.iter().map(|(_, s)| s.objects.len()).max().unwrap_or(0));
            let mut out_records: Vec<Record> = header.into_iter().map(Record::Header).collect();
            for (id, s) in &scenes {
                let mut s = s.clone();
                s.humans.truncate(persons);
                s.objects.truncate(objects);
                for o in &mut s.objects {
                    o.resize(k, crate::scene::Keypoint::INVALID);
                }
                let cfg = SceneConfig {
                    grid_width: grid.0,
                    grid_height: grid.1,
                    frames: s.frames,
                    persons,
                    objects,
                    joints,
                    object_points: k,
                };
                let tokens = tokenize_scene(&s, &cfg)?;
                out_records.push(Record::Tokens(TokensRecord::new(id, &cfg, &tokens, &s)));
            }
            save_knd(&path, &out_records)?;
            say(out, format!("{} token records -> {}", scenes.len(), path.display()))
        }
        Command::Synth { spec, out: dir } => {
            let records = read_knd(&spec)?;
            let spec = records
                .iter()
                .find_map(|r| match r {
                    Record::Synth(s) => Some(s.clone()),
                    _ => None,
                })
                .ok_or_else(|| Error::Invalid("spec file holds no `synth` record".into()))?;
            let ds = generate_synthetic(&spec)?;
            ds.write(&dir)?;
            let mut report = String::from("class_a,class_b,human_only,object_aware\n");
            for r in &ds.ambiguity {
                report.push_str(&format!(
                    "{},{},{:.6},{:.6}\n",
                    spec.classes[r.pair.0].name, spec.classes[r.pair.1].name, r.human_only, r.object_aware
                ));
            }
            let rp = dir.join("oracle.csv");
            fs::write(&rp, &report).map_err(|e| Error::io(&rp, e))?;
            say(
                out,
                format!("{} train / {} test clips -> {}", ds.train.len(), ds.test.len(), dir.display()),
            )?;
            out.write_all(report.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
        Command::Train { data, config, out: dir } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let (mcfg, tcfg) = parse_config(&text)?;
            let (header, scenes, _) = load_split(&data, "train", &mcfg, &tcfg)?;
            let test_path = data.join("test.knd");
            let test = if test_path.exists() {
                Some(load_split(&data, "test", &mcfg, &tcfg)?)
            } else {
                None
            };
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(tcfg.seed);
            let mut model = Model::new(mcfg, &mut rng)?;
            let data_ref = TrainData {
                scenes: &scenes,
                joint_flip: &header.flip_perm,
            };
            let rows = match &test {
                Some((_, test_scenes, test_clips)) => {
                    let mut evaluate = |m: &Model| score(m, test_scenes, test_clips);
                    train_loop(&mut model, &data_ref, &tcfg, Some(&dir), Some(&mut evaluate))?
                }
                None => train_loop(&mut model, &data_ref, &tcfg, Some(&dir), None)?,
            };
            let last = rows.last();
            say(
                out,
                format!(
                    "{} iterations, final loss {}, metric {} -> {}",
                    rows.len(),
                    last.map_or("-".into(), |r| format!("{:.6}", r.loss)),
                    last.and_then(|r| r.metric).map_or("-".into(), |m| format!("{m:.6}")),
                    dir.display()
                ),
            )
        }
        Command::Eval {
            data,
            ckpt,
            metric,
            split,
            fps,
            iou,
        } => {
            let model = Model::load(&ckpt)?;
            let tcfg = TrainConfig {
                target_fps: fps,
                track_iou: iou,
                ..TrainConfig::default()
            };
            let (header, scenes, clips) = load_split(&data, &split, &model.config, &tcfg)?;
            match metric {
                Metric::Top1 => {
                    let acc = model_top1(&model, &scenes)?;
                    say(out, format!("top1,{acc:.6}"))
                }
                Metric::Framemap => {
                    let preds = actor_predictions(&model, &scenes)?;
                    let truth = ground_truth(&clips)?;
                    let report = frame_map(&preds, &truth, model.config.classes, FRAME_AP_IOU)?;
                    out.write_all(report.to_csv(&header.classes).as_bytes())
                        .map_err(|e| Error::io("<stdout>", e))
                }
            }
        }
        Command::Gradcheck { config, seed, tol } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let (mcfg, _) = parse_config(&text)?;
            let report = gradient_check(&mcfg, seed)?;
            let verdict = if report.passes(tol) { "pass" } else { "fail" };
            say(
                out,
                format!(
                    "gradcheck {verdict}: {} scalars, max relative error {:.3e} at {}[{}] (tolerance {tol:e})",
                    report.checked, report.max_relative_error, report.worst.0, report.worst.1
                ),
            )?;
            if report.passes(tol) {
                Ok(())
            } else {
                Err(Error::Invalid(format!(
                    "gradient check failed: max relative error {:.3e}",
                    report.max_relative_error
                )))
            }
        }
        Command::VizTokens { input, out: path, index } => {
            let records = read_knd(&input)?;
            let tokens: Vec<&TokensRecord> = records
                .iter()
                .filter_map(|r| match r {
                    Record::Tokens(t) => Some(t),
                    _ => None,
                })
                .collect();
            let t = tokens.get(index).ok_or_else(|| {
                Error::Invalid(format!("{} holds {} token records, no index {index}", input.display(), tokens.len()))
            })?;
            let svg = render_tokens(t);
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            say(out, format!("{} -> {}", t.id, path.display()))
        }
    }
}

type Split = (Header, Vec<SceneSequence>, Vec<ClipRecord>);

/// Loads `<dir>/<split>.knd` and converts every clip for `model`.
fn load_split(dir: &Path, split: &str, model: &ModelConfig, train: &TrainConfig) -> Result<Split> {
    let path = dir.join(format!("{split}.knd"));
    let (header, clips) = load_clips(&path)?;
    let header = header.ok_or_else(|| Error::Invalid(format!("{} has no header", path.display())))?;
    if header.joints != model.scene.joints {
        return Err(Error::Invalid(format!(
            "data has {} joints per person, model expects {}",
            header.joints, model.scene.joints
        )));
    }
    if header.classes.len() != model.classes {
        return Err(Error::Invalid(format!(
            "data declares {} classes, model has {}",
            header.classes.len(),
            model.classes
        )));
    }
    let cfg = PipelineConfig {
        iou_threshold: train.track_iou,
        target_fps: train.target_fps,
        scene: model.scene,
    };
    let masks = MaskDir(dir);
    let scenes = clips
        .iter()
        .map(|c| clip_to_scene(c, &cfg, &masks))
        .collect::<Result<Vec<_>>>()?;
    Ok((header, scenes, clips))
}

fn ground_truth(clips: &[ClipRecord]) -> Result<Vec<crate::eval::GroundTruth>> {
    let mut out = Vec::new();
    for (i, c) in clips.iter().enumerate() {
        out.extend(clip_ground_truth(c, i)?);
    }
    Ok(out)
}

/// Top-1 for video heads, frame-mAP for actor heads.
fn score(model: &Model, scenes: &[SceneSequence], clips: &[ClipRecord]) -> Result<f64> {
    match model.config.head {
        HeadMode::Video => model_top1(model, scenes),
        HeadMode::Actor => {
            let preds = actor_predictions(model, scenes)?;
            Ok(frame_map(&preds, &ground_truth(clips)?, model.config.classes, FRAME_AP_IOU)?.map)
        }
    }
}
