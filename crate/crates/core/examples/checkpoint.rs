//! Saves a model, loads it back and checks that the bytes and predictions
//! survive the round trip.
//!
//! cargo run --example checkpoint -- [dir]

use keynet::model::{HeadMode, Model, ModelConfig};
use keynet::scene::{SceneConfig, SceneSequence, HumanTrack, Keypoint, tokenize_scene};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> keynet::Result<()> {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let cfg = ModelConfig {
        head: HeadMode::Actor,
        hidden: 16,
        heads: 2,
        layers: 1,
        intermediate: 16,
        classes: 3,
        scene: SceneConfig {
            grid_width: 8,
            grid_height: 6,
            frames: 2,
            persons: 1,
            objects: 0,
            joints: 2,
            object_points: 1,
        },
        ..ModelConfig::default()
    };
    let model = Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(3))?;
    let path = dir.join("keynet-example.bin");
    model.save(&path)?;
    let loaded = Model::load(&path)?;
    let bytes = std::fs::read(&path).map_err(|e| keynet::Error::io(&path, e))?;
    println!(
        "{}: {} bytes, {} tensors, {} trainable scalars",
        path.display(),
        bytes.len(),
        loaded.names().len(),
        loaded.trainable_scalars()
    );
    assert_eq!(loaded.to_bytes(), bytes, "save -> load -> save is byte-identical");

    let mut scene = SceneSequence::empty(80.0, 60.0, 2);
    scene.humans.push(HumanTrack {
        joints: vec![vec![Keypoint::new(10.0, 20.0), Keypoint::new(12.0, 30.0)]; 2],
        keyframe_box: None,
        labels: vec![1],
    });
    let tokens = tokenize_scene(&scene, &model.config.scene)?;
    let a = model.predict(std::slice::from_ref(&tokens))?;
    let b = loaded.predict(&[tokens])?;
    println!("actor logits {:?}", a.values.data());
    assert_eq!(a.values, b.values);
    std::fs::remove_file(&path).map_err(|e| keynet::Error::io(&path, e))?;
    Ok(())
}
