//! Converts a synthetic clip into a scene sequence, prints its four token
//! streams and renders them as SVG.
//!
//! cargo run --example tokenize -- [out.svg]

use keynet::cli::render_tokens;
use keynet::data::{clip_to_scene, generate_synthetic, PipelineConfig, SynthSpec, TokensRecord};
use keynet::scene::{tokenize_scene, SceneConfig};

fn main() -> keynet::Result<()> {
    let out = std::env::args().nth(1);
    let mut spec = SynthSpec::standard(2);
    spec.clips_per_class = 1;
    let ds = generate_synthetic(&spec)?;
    // the reach_bar clip carries a real object
    let clip = ds.clips().last().expect("clips");
    let cfg = PipelineConfig {
        iou_threshold: 0.5,
        target_fps: spec.target_fps(),
        scene: SceneConfig {
            grid_width: 32,
            grid_height: 24,
            frames: 4,
            persons: 2,
            objects: 1,
            joints: 15,
            object_points: 8,
        },
    };
    let scene = clip_to_scene(&clip.record, &cfg, &ds.mask_table())?;
    let tokens = tokenize_scene(&scene, &cfg.scene)?;
    println!(
        "{}: {} humans, {} objects -> {} tokens ({} valid)",
        clip.record.id,
        scene.humans.len(),
        scene.objects.len(),
        tokens.len(),
        tokens.valid_count()
    );
    let row = |name: &str, v: &[usize]| {
        let cells: Vec<String> = v.iter().map(|x| format!("{x:4}")).collect();
        println!("{name:>9} {}", cells.join(""));
    };
    // first frame of the first actor, then the object
    let per_frame = cfg.scene.joints;
    let object_start = cfg.scene.persons * cfg.scene.frames * per_frame;
    for (name, stream) in [
        ("position", &tokens.position),
        ("type", &tokens.token_type),
        ("segment", &tokens.segment),
        ("instance", &tokens.instance),
    ] {
        let mut v = stream[..per_frame].to_vec();
        v.extend_from_slice(&stream[object_start..]);
        row(name, &v);
    }

    if let Some(path) = out {
        let rec = TokensRecord::new(&clip.record.id, &cfg.scene, &tokens, &scene);
        std::fs::write(&path, render_tokens(&rec)).map_err(|e| keynet::Error::io(&path, e))?;
        println!("wrote {path}");
    }
    Ok(())
}
