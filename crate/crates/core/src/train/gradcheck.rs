use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{batch_loss, loss_and_grads, Sample};
use crate::error::{Error, Result};
use crate::model::{ForwardOptions, HeadMode, Model, ModelConfig};
use crate::numeric::{finite_difference_grads, relative_error, Tape, Tensor};
use crate::scene::{tokenize_scene, HumanTrack, Keypoint, SceneSequence};

/// Central-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so that gradients that are zero up
/// to rounding do not count as failures.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: (String, usize),
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

fn random_sample(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<Sample> {
    let sc = &cfg.scene;
    let (w, h) = (64.0, 48.0);
    let mut scene = SceneSequence::empty(w, h, sc.frames);
    let point = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.75) {
            Keypoint::new(rng.random_range(0.0..w), rng.random_range(0.0..h))
        } else {
            Keypoint::INVALID
        }
    };
    for _ in 0..sc.persons {
        let joints = (0..sc.frames)
            .map(|_| (0..sc.joints).map(|_| point(rng)).collect())
            .collect();
        let labels = (0..cfg.classes).filter(|_| rng.random_bool(0.4)).collect();
        scene.humans.push(HumanTrack {
            joints,
            keyframe_box: None,
            labels,
        });
    }
    for _ in 0..sc.objects {
        scene
            .objects
            .push((0..sc.object_points).map(|_| point(rng)).collect());
    }
    Ok(Sample {
        tokens: tokenize_scene(&scene, sc)?,
        label: Some(rng.random_range(0..cfg.classes)),
        actor_labels: scene.humans.iter().map(|h| h.labels.clone()).collect(),
    })
}

fn loss_of(model: &Model, params: &[Tensor], samples: &[Sample]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.constant(p.clone())).collect();
    let tokens: Vec<_> = samples.iter().map(|s| s.tokens.clone()).collect();
    let fwd = model
        .forward(&mut tape, &vars, &tokens, &ForwardOptions::default())
        .expect("forward on checked inputs");
    let loss = batch_loss(&mut tape, &model.config, &fwd, samples).expect("loss on checked inputs");
    tape.value(loss).data()[0]
}

/// Compares every analytic parameter gradient of a freshly initialized model
/// against central finite differences on a random two-sample batch.
pub fn gradient_check(cfg: &ModelConfig, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig {
        dropout: 0.0,
        ..cfg.clone()
    };
    let model = Model::new(cfg.clone(), &mut rng)?;
    let samples: Vec<Sample> = (0..2)
        .map(|_| random_sample(&cfg, &mut rng))
        .collect::<Result<_>>()?;
    if cfg.head == HeadMode::Actor && samples.iter().all(|s| s.tokens.valid_count() == 0) {
        return Err(Error::Invalid("gradient check drew only empty scenes".into()));
    }
    let (_, grads) = loss_and_grads(&model, &samples, None)?;
    let mut params = model.params().to_vec();
    let numeric = finite_difference_grads(&mut params, GRADCHECK_STEP, |p| {
        loss_of(&model, p, &samples)
    });
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst: (String::new(), 0),
    };
    for (i, fd) in numeric.iter().enumerate() {
        for (j, &n) in fd.data().iter().enumerate() {
            let a = grads[i].as_ref().map_or(0.0, |g| g.data()[j]);
            let err = relative_error(a, n, GRADCHECK_FLOOR);
            report.checked += 1;
            if err > report.max_relative_error || !err.is_finite() {
                report.max_relative_error = err;
                report.worst = (model.names()[i].clone(), j);
            }
        }
    }
    Ok(report)
}
