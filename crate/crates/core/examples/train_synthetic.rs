//! Trains a video-level classifier on the synthetic four-class set and reports
//! held-out top-1 accuracy.
//!
//! cargo run --release --example train_synthetic -- [objects] [iterations] [arch]

use std::time::Instant;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use keynet::data::{clip_to_scene, generate_synthetic, PipelineConfig, SynthSpec};
use keynet::eval::model_top1;
use keynet::model::{HeadMode, Model, ModelConfig};
use keynet::scene::{AugmentPolicy, SceneConfig};
use keynet::train::{train_loop, TrainConfig, TrainData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> keynet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let objects: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(1);
    let iterations: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(800);
    let arch = args.get(2).map_or("flat", String::as_str).parse()?;

    let t0 = Instant::now();
    let spec = SynthSpec::standard(0);
    let ds = generate_synthetic(&spec)?;
    let masks = ds.mask_table();
    let pipeline = PipelineConfig {
        iou_threshold: 0.5,
        target_fps: spec.target_fps(),
        scene: SceneConfig {
            grid_width: 32,
            grid_height: 24,
            frames: spec.frames,
            persons: 1,
            objects,
            joints: 15,
            object_points: 8,
        },
    };
    let convert = |clips: &[keynet::data::SynthClip]| {
        clips
            .iter()
            .map(|c| clip_to_scene(&c.record, &pipeline, &masks))
            .collect::<keynet::Result<Vec<_>>>()
    };
    let (train, test) = (convert(&ds.train)?, convert(&ds.test)?);
    println!("data ready in {:.1}s", t0.elapsed().as_secs_f64());

    let cfg = ModelConfig {
        architecture: arch,
        head: HeadMode::Video,
        hidden: 32,
        heads: 2,
        layers: 2,
        intermediate: 64,
        classes: spec.classes.len(),
        scene: pipeline.scene,
        ..ModelConfig::default()
    };
    let tc = TrainConfig {
        learning_rate: 2e-3,
        iterations,
        warmup_fraction: 0.05,
        batch_size: 16,
        augment: AugmentPolicy { flip: true, crop: false, expand: false },
        eval_every: 100,
        ..TrainConfig::default()
    };
    let mut model = Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(tc.seed))?;
    println!("{} parameters", model.config.count_parameters());
    let start = Instant::now();
    let mut evaluate = |m: &Model| model_top1(m, &test);
    let data = TrainData { scenes: &train, joint_flip: &ds.header.flip_perm };
    let rows = train_loop(&mut model, &data, &tc, None, Some(&mut evaluate))?;
    for r in rows.iter().filter(|r| r.metric.is_some()) {
        println!("iter {:4}  loss {:.4}  top-1 {:.3}", r.iter, r.loss, r.metric.unwrap_or(0.0));
    }
    println!("{:.1}s", start.elapsed().as_secs_f64());
    println!("train top-1 {:.3}", model_top1(&model, &train)?);
    let predicted = keynet::eval::predict_classes(&model, &test)?;
    let mut confusion = vec![vec![0usize; spec.classes.len()]; spec.classes.len()];
    for (s, p) in test.iter().zip(&predicted) {
        confusion[s.label.unwrap_or(0)][*p] += 1;
    }
    for (c, row) in spec.classes.iter().zip(&confusion) {
        println!("{:>12} {row:?}", c.name);
    }
    Ok(())
}
