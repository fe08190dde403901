//! Per-actor action localization with three actors per clip: trains the
//! hierarchical encoder and a flat encoder of the same size, and reports
//! frame-mAP for both next to a random-score baseline.
//!
//! cargo run --release --example multi_actor -- [iterations] [seed]

use std::time::Instant;

use keynet::data::{clip_ground_truth, clip_to_scene, generate_synthetic, PipelineConfig, SynthClip, SynthSpec};
use keynet::eval::{actor_predictions, frame_map, ActorPrediction, GroundTruth, FRAME_AP_IOU};
use keynet::model::{Architecture, HeadMode, Model, ModelConfig};
use keynet::scene::{AugmentPolicy, SceneConfig, SceneSequence};
use keynet::train::{train_loop, TrainConfig, TrainData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> keynet::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let iterations = args.first().map_or(600, |&v| v as usize);
    let seed = args.get(1).copied().unwrap_or(0);

    let spec = SynthSpec::multi_actor(seed);
    let ds = generate_synthetic(&spec)?;
    let masks = ds.mask_table();
    let pipeline = PipelineConfig {
        iou_threshold: 0.5,
        target_fps: spec.target_fps(),
        scene: SceneConfig {
            grid_width: 32,
            grid_height: 24,
            frames: spec.frames,
            persons: 3,
            objects: 0,
            joints: 15,
            object_points: 8,
        },
    };
    let convert = |clips: &[SynthClip]| -> keynet::Result<Vec<SceneSequence>> {
        clips.iter().map(|c| clip_to_scene(&c.record, &pipeline, &masks)).collect()
    };
    let (train, test) = (convert(&ds.train)?, convert(&ds.test)?);
    let mut truth: Vec<GroundTruth> = Vec::new();
    for (i, c) in ds.test.iter().enumerate() {
        truth.extend(clip_ground_truth(&c.record, i)?);
    }
    let classes = spec.classes.len();

    let tc = TrainConfig {
        learning_rate: 1e-3,
        iterations,
        warmup_fraction: 0.05,
        batch_size: 8,
        seed,
        augment: AugmentPolicy { flip: true, crop: false, expand: false },
        ..TrainConfig::default()
    };
    let data = TrainData { scenes: &train, joint_flip: &ds.header.flip_perm };
    for (arch, layers) in [(Architecture::Hierarchical, 1), (Architecture::Flat, 2)] {
        let cfg = ModelConfig {
            architecture: arch,
            head: HeadMode::Actor,
            hidden: 32,
            heads: 2,
            layers,
            intermediate: 64,
            classes,
            scene: pipeline.scene,
            ..ModelConfig::default()
        };
        let mut model = Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let start = Instant::now();
        train_loop(&mut model, &data, &tc, None, None)?;
        let preds = actor_predictions(&model, &test)?;
        let report = frame_map(&preds, &truth, classes, FRAME_AP_IOU)?;
        println!(
            "{arch:>12}: {} parameters, frame-mAP {:.3} ({:.0}s)",
            model.config.count_parameters(),
            report.map,
            start.elapsed().as_secs_f64()
        );
        if arch == Architecture::Hierarchical {
            // identical boxes with random scores
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chance = 0.0;
            for _ in 0..20 {
                let random: Vec<ActorPrediction> = preds
                    .iter()
                    .map(|p| ActorPrediction { scores: (0..classes).map(|_| rng.random()).collect(), ..p.clone() })
                    .collect();
                chance += frame_map(&random, &truth, classes, FRAME_AP_IOU)?.map / 20.0;
            }
            println!("{:>12}: frame-mAP {chance:.3}", "random");
        }
    }
    Ok(())
}
