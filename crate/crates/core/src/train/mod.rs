//! Learning-rate schedule, loss assembly, optimizer steps and the training loop.

mod config;
mod gradcheck;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{parse_config, SamplerMode, TrainConfig};
pub use gradcheck::{gradient_check, GradCheckReport, GRADCHECK_FLOOR, GRADCHECK_STEP};

use crate::error::{Error, Result};
use crate::model::{DropoutKey, Forward, ForwardOptions, HeadMode, Model, ModelConfig};
use crate::numeric::{adam_step, AdamState, Tape, Tensor, Var};
use crate::scene::{
    augment, tokenize_scene, uniform_sample_indices, weighted_sample_indices, SceneSequence,
    TokenizedScene,
};

/// Warmup from 0 to η over `w = round(fraction·total)` iterations, then linear
/// decay to 0 at `total`.
pub fn lr_at(iter: usize, cfg: &TrainConfig) -> f64 {
    let total = cfg.iterations;
    if iter >= total {
        return 0.0;
    }
    let w = (cfg.warmup_fraction * total as f64).round() as usize;
    let eta = cfg.learning_rate;
    if iter <= w {
        if w == 0 {
            return eta;
        }
        eta * iter as f64 / w as f64
    } else {
        eta * (1.0 - (iter - w) as f64 / (total - w) as f64)
    }
}

/// One tokenized training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tokens: TokenizedScene,
    /// Video-level class.
    pub label: Option<usize>,
    /// Multi-label classes per person slot.
    pub actor_labels: Vec<Vec<usize>>,
}

impl Sample {
    pub fn from_scene(scene: &SceneSequence, cfg: &ModelConfig) -> Result<Self> {
        Ok(Self {
            tokens: tokenize_scene(scene, &cfg.scene)?,
            label: scene.label,
            actor_labels: scene.humans.iter().map(|h| h.labels.clone()).collect(),
        })
    }
}

/// Class used to balance sampling: the video label, else the first actor label.
pub fn balance_label(scene: &SceneSequence) -> usize {
    scene
        .label
        .or_else(|| scene.humans.iter().find_map(|h| h.labels.first().copied()))
        .unwrap_or(0)
}

/// Mean loss of a forward pass: softmax cross-entropy in video mode, per-class
/// binary cross-entropy over labeled, non-empty actor rows in actor mode.
pub fn batch_loss(
    tape: &mut Tape,
    cfg: &ModelConfig,
    forward: &Forward,
    samples: &[Sample],
) -> Result<Var> {
    match cfg.head {
        HeadMode::Video => {
            let labels = samples
                .iter()
                .map(|s| {
                    s.label
                        .ok_or_else(|| Error::Invalid("video-mode sample without a label".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            tape.cross_entropy(forward.logits, &labels)
        }
        HeadMode::Actor => {
            let (n, c) = (cfg.scene.persons, cfg.classes);
            let mut targets = vec![0.0; samples.len() * n * c];
            let mut weights = vec![0.0; samples.len() * n * c];
            for (b, s) in samples.iter().enumerate() {
                for (p, labels) in s.actor_labels.iter().enumerate().take(n) {
                    let row = b * n + p;
                    if !forward.valid[row] {
                        continue;
                    }
                    weights[row * c..(row + 1) * c].iter_mut().for_each(|w| *w = 1.0);
                    for &l in labels {
                        if l >= c {
                            return Err(Error::Invalid(format!("actor label {l} outside {c} classes")));
                        }
                        targets[row * c + l] = 1.0;
                    }
                }
            }
            tape.bce_with_logits_weighted(forward.logits, &targets, &weights)
        }
    }
}

/// Loss and parameter gradients for one batch, without updating anything.
pub fn loss_and_grads(
    model: &Model,
    samples: &[Sample],
    dropout: Option<DropoutKey>,
) -> Result<(f64, Vec<Option<Tensor>>)> {
    let mut tape = Tape::new();
    let params = model.bind(&mut tape);
    let tokens: Vec<TokenizedScene> = samples.iter().map(|s| s.tokens.clone()).collect();
    let opts = ForwardOptions {
        dropout,
        collect_attention: false,
    };
    let fwd = model.forward(&mut tape, &params, &tokens, &opts)?;
    let loss = batch_loss(&mut tape, &model.config, &fwd, samples)?;
    let value = tape.value(loss).data()[0];
    if !value.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss {value} on a batch of {}",
            samples.len()
        )));
    }
    tape.backward(loss)?;
    let grads = params.iter().map(|&p| tape.grad(p)).collect();
    Ok((value, grads))
}

fn clip_gradients(grads: &mut [Option<Tensor>], max_norm: f64) {
    let norm = grads
        .iter()
        .flatten()
        .flat_map(|g| g.data())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut().flatten() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Forward, backward and one Adam update. Returns the pre-update loss.
pub fn train_step(
    model: &mut Model,
    state: &mut AdamState,
    samples: &[Sample],
    lr: f64,
    dropout: Option<DropoutKey>,
    clip_norm: Option<f64>,
) -> Result<f64> {
    let (loss, mut grads) = loss_and_grads(model, samples, dropout)?;
    if let Some(max) = clip_norm {
        clip_gradients(&mut grads, max);
    }
    if let Some((i, _)) = grads
        .iter()
        .enumerate()
        .find(|(_, g)| g.as_ref().is_some_and(|g| !g.is_finite()))
    {
        return Err(Error::NonFinite(format!(
            "gradient of `{}` at loss {loss}",
            model.names()[i]
        )));
    }
    adam_step(model.params_mut(), &grads, state, lr)?;
    Ok(loss)
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub iter: usize,
    pub lr: f64,
    pub loss: f64,
    pub metric: Option<f64>,
}

/// Renders the log as CSV with header `iter,lr,loss,metric`.
pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("iter,lr,loss,metric\n");
    for r in rows {
        let metric = r.metric.map(|m| m.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.iter, r.lr, r.loss, metric).expect("write to string");
    }
    out
}

/// Dataset and per-dataset augmentation facts handed to [`train_loop`].
#[derive(Debug, Clone)]
pub struct TrainData<'a> {
    pub scenes: &'a [SceneSequence],
    /// Left/right joint swap used by flip augmentation.
    pub joint_flip: &'a [usize],
}

pub type Evaluator<'a> = dyn FnMut(&Model) -> Result<f64> + 'a;

/// Runs `cfg.iterations` steps of sample → augment → tokenize → update.
///
/// With `out_dir`, writes `model.bin` (the latest weights), numbered
/// `checkpoint-NNNNNN.bin` files at the configured cadence and `metrics.csv`.
pub fn train_loop(
    model: &mut Model,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    mut evaluate: Option<&mut Evaluator<'_>>,
) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    if data.scenes.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let balance: Vec<usize> = data.scenes.iter().map(balance_label).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(model.params(), cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut rows = Vec::with_capacity(cfg.iterations);
    let save = |model: &Model, name: &str| -> Result<()> {
        match out_dir {
            Some(dir) => model.save(&dir.join(name)),
            None => Ok(()),
        }
    };
    for iter in 1..=cfg.iterations {
        let picks = match cfg.sampler {
            SamplerMode::Uniform => uniform_sample_indices(balance.len(), cfg.batch_size, &mut rng)?,
            SamplerMode::Balanced => weighted_sample_indices(&balance, cfg.batch_size, &mut rng)?,
        };
        let mut batch = Vec::with_capacity(picks.len());
        for i in picks {
            let scene = augment(&data.scenes[i], &mut rng, cfg.augment, data.joint_flip)?;
            batch.push(Sample::from_scene(&scene, &model.config)?);
        }
        let lr = lr_at(iter, cfg);
        let key = DropoutKey {
            seed: cfg.seed,
            step: iter as u64,
        };
        let loss = train_step(model, &mut state, &batch, lr, Some(key), cfg.clip_norm)?;
        let due = iter == cfg.iterations || (cfg.eval_every > 0 && iter % cfg.eval_every == 0);
        let metric = match evaluate.as_deref_mut() {
            Some(f) if due => Some(f(model)?),
            _ => None,
        };
        rows.push(MetricRow {
            iter,
            lr,
            loss,
            metric,
        });
        if cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0 {
            save(model, &format!("checkpoint-{iter:06}.bin"))?;
        }
    }
    save(model, "model.bin")?;
    if let Some(dir) = out_dir {
        let path = dir.join("metrics.csv");
        fs::write(&path, metrics_csv(&rows)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(total: usize) -> TrainConfig {
        TrainConfig {
            iterations: total,
            learning_rate: 1e-4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_endpoints() {
        let c = cfg(1000);
        assert_eq!(lr_at(0, &c), 0.0);
        assert_eq!(lr_at(10, &c), 1e-4);
        assert_eq!(lr_at(1000, &c), 0.0);
        assert!((lr_at(505, &c) - 0.5e-4).abs() < 1e-18);
        assert!((lr_at(5, &c) - 0.5e-4).abs() < 1e-18);
    }

    #[test]
    fn schedule_peaks_at_eta() {
        let c = cfg(300);
        let peak = (0..=300).map(|i| lr_at(i, &c)).fold(0.0, f64::max);
        assert_eq!(peak, 1e-4);
    }

    #[test]
    fn csv_layout() {
        let rows = [
            MetricRow {
                iter: 1,
                lr: 0.5,
                loss: 2.0,
                metric: None,
            },
            MetricRow {
                iter: 2,
                lr: 0.25,
                loss: 1.5,
                metric: Some(0.75),
            },
        ];
        assert_eq!(metrics_csv(&rows), "iter,lr,loss,metric\n1,0.5,2,\n2,0.25,1.5,0.75\n");
    }
}
