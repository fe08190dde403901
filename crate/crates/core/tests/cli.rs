use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use keynet::data::{clip_to_scene, load_clips, read_knd, MaskDir, PipelineConfig, Record, TokensRecord};
use keynet::geometry::BinaryMask;
use keynet::scene::{tokenize_scene, SceneConfig};

fn keynet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keynet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY_SPEC: &str = r#"{"kind":"synth","classes":[{"name":"wave","motion":"wave"},{"name":"crouch","motion":"crouch"}],"clips_per_class":5,"frames":10,"stride":2,"fps":10.0,"jitter":1.0,"seed":4,"actors":1,"placement":0.03,"holdout":0.2,"width":160.0,"height":120.0}
"#;

const TINY_CFG: &str = "architecture=hierarchical
head=video
hidden=8
heads=2
layers=1
intermediate=8
classes=2
grid_width=8
grid_height=6
frames=10
persons=1
objects=1
joints=15
object_points=8
iterations=6
batch_size=2
learning_rate=0.001
warmup_fraction=0.2
eval_every=3
";

fn tiny_data(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.knd");
    fs::write(&spec, TINY_SPEC).unwrap();
    let data = dir.join("data");
    let o = keynet(&["synth", "--spec", s(&spec), "--out", s(&data)]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    data
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = keynet(&["contour", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("Usage"), "{}", text(&o.stderr));
    assert_eq!(keynet(&[]).status.code(), Some(2));
    assert_eq!(keynet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(keynet(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_print_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.pgm");
    let out = dir.path().join("kp.knd");
    let o = keynet(&["contour", "--mask", s(&missing), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "), "{err}");
    assert!(!out.exists());

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "hidden=8\nwat=1\n").unwrap();
    let o = keynet(&["gradcheck", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(text(&o.stderr).trim(), "error: line 2: unknown setting `wat`");
}

#[test]
fn contour_of_three_by_three_block() {
    let dir = tempfile::tempdir().unwrap();
    let mask = BinaryMask::from_ascii(
        ".....
         .###.
         .###.
         .###.
         .....",
    )
    .unwrap();
    let pgm = dir.path().join("block.pgm");
    mask.write_pgm(&pgm).unwrap();
    let out = dir.path().join("kp.knd");
    let o = keynet(&["contour", "--mask", s(&pgm), "--k", "8", "--out", s(&out)]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let records = read_knd(&out).unwrap();
    let [Record::Keypoints(k)] = records.as_slice() else { panic!("{records:?}") };
    assert_eq!(k.points.len(), 8);
    // the ring has 8 pixels, so 8 equidistant samples land on all of them
    let mut got: Vec<(i64, i64)> = k.points.iter().map(|p| (p[0] as i64, p[1] as i64)).collect();
    got.sort();
    let ring: Vec<(i64, i64)> = (1..=3)
        .flat_map(|x| (1..=3).map(move |y| (x, y)))
        .filter(|&p| p != (2, 2))
        .collect();
    assert_eq!(got, ring);
    assert!(k.points.iter().all(|p| p[0].fract() == 0.0 && p[1].fract() == 0.0));
}

#[test]
fn gradcheck_passes_on_shipped_micro_configs() {
    for name in ["micro.cfg", "micro_flat.cfg"] {
        let cfg = configs().join(name);
        let o = keynet(&["gradcheck", "--config", s(&cfg)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}{}", text(&o.stdout), text(&o.stderr));
        assert!(text(&o.stdout).starts_with("gradcheck pass"));
    }
}

#[test]
fn file_pipeline_is_idempotent_and_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path());
    let train = data.join("train.knd");
    let run = |tag: &str| -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let tracks = dir.path().join(format!("tracks-{tag}.knd"));
        let tokens = dir.path().join(format!("tokens-{tag}.knd"));
        let svg = dir.path().join(format!("scene-{tag}.svg"));
        let steps: [Vec<&str>; 3] = [
            vec!["track", "--in", s(&train), "--n", "1", "--m", "1", "--fps", "5", "--frames", "10", "--out", s(&tracks)],
            vec!["tokenize", "--in", s(&tracks), "--grid", "32x24", "--out", s(&tokens)],
            vec!["viz-tokens", "--in", s(&tokens), "--out", s(&svg), "--index", "1"],
        ];
        for args in &steps {
            let o = keynet(args);
            assert!(o.status.success(), "{args:?}: {}", text(&o.stderr));
        }
        (fs::read(&tracks).unwrap(), fs::read(&tokens).unwrap(), fs::read(&svg).unwrap())
    };
    let first = run("a");
    assert_eq!(first, run("b"));
    assert!(text(&first.2).starts_with("<svg"));

    let (_, clips) = load_clips(&train).unwrap();
    let cfg = PipelineConfig {
        iou_threshold: 0.5,
        target_fps: 5.0,
        scene: SceneConfig {
            grid_width: 32,
            grid_height: 24,
            frames: 10,
            persons: 1,
            objects: 1,
            joints: 15,
            object_points: 8,
        },
    };
    let from_file: Vec<TokensRecord> = read_knd(&dir.path().join("tokens-a.knd"))
        .unwrap()
        .into_iter()
        .filter_map(|r| match r {
            Record::Tokens(t) => Some(t),
            _ => None,
        })
        .collect();
    assert_eq!(from_file.len(), clips.len());
    for (clip, rec) in clips.iter().zip(&from_file) {
        let scene = clip_to_scene(clip, &cfg, &MaskDir(&data)).unwrap();
        let tokens = tokenize_scene(&scene, &cfg.scene).unwrap();
        assert_eq!(rec.id, clip.id);
        assert_eq!(rec.tokens(), tokens, "{}", clip.id);
        assert_eq!(rec.label, clip.label);
    }
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_data(dir.path());
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, TINY_CFG).unwrap();
    let ckpt = dir.path().join("ckpt");
    let o = keynet(&["train", "--data", s(&data), "--config", s(&cfg), "--out", s(&ckpt)]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let log = fs::read_to_string(ckpt.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "iter,lr,loss,metric");
    assert_eq!(lines.len(), 7);
    assert!(!lines[3].ends_with(',') && !lines[6].ends_with(','), "{log}");

    let model = ckpt.join("model.bin");
    let o = keynet(&["eval", "--data", s(&data), "--ckpt", s(&model), "--metric", "top1"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    let acc: f64 = out.trim().strip_prefix("top1,").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    // the final logged metric is the same evaluation
    let logged: f64 = lines[6].rsplit(',').next().unwrap().parse().unwrap();
    assert!((acc - logged).abs() < 1e-6, "{acc} vs {logged}");

    // a second identical run writes identical bytes
    let again = dir.path().join("ckpt2");
    let o = keynet(&["train", "--data", s(&data), "--config", s(&cfg), "--out", s(&again)]);
    assert!(o.status.success());
    assert_eq!(fs::read(&model).unwrap(), fs::read(again.join("model.bin")).unwrap());
    assert_eq!(log, fs::read_to_string(again.join("metrics.csv")).unwrap());

    // a video head has no actor scores to rank
    let o = keynet(&["eval", "--data", s(&data), "--ckpt", s(&model), "--metric", "framemap"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(text(&o.stderr).lines().count(), 1);

    let actor_cfg = dir.path().join("actor.cfg");
    fs::write(&actor_cfg, TINY_CFG.replace("head=video", "head=actor")).unwrap();
    let actor = dir.path().join("actor");
    let o = keynet(&["train", "--data", s(&data), "--config", s(&actor_cfg), "--out", s(&actor)]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let o = keynet(&["eval", "--data", s(&data), "--ckpt", s(&actor.join("model.bin")), "--metric", "framemap"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let report = text(&o.stdout);
    assert!(report.lines().count() >= 2, "{report}");
}

#[test]
fn shipped_specs_generate() {
    for name in ["synth_spec.knd", "multi_actor_spec.knd"] {
        let records = read_knd(&configs().join(name)).unwrap();
        let [Record::Synth(spec)] = records.as_slice() else { panic!("{name}") };
        spec.validate().unwrap();
    }
}
