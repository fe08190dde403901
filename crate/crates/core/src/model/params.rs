use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};

/// Parameter indices of one post-norm encoder block.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockParams {
    pub q: (usize, usize),
    pub k: (usize, usize),
    pub v: (usize, usize),
    pub out: (usize, usize),
    pub norm1: (usize, usize),
    pub ff1: (usize, usize),
    pub ff2: (usize, usize),
    pub norm2: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub position: usize,
    pub token_type: usize,
    pub segment: usize,
    pub instance: usize,
    pub cls: Vec<usize>,
    pub encoders: Vec<Vec<BlockParams>>,
    pub head: (usize, usize),
}

/// Named parameter tensors plus the configuration that shapes them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
}

enum Init {
    Normal,
    Zeros,
    Ones,
    /// Normal with row 0 held at zero.
    Embedding,
}

struct Builder<'a> {
    names: Vec<String>,
    params: Vec<Tensor>,
    std: f64,
    /// `None` leaves weights at zero (shape-only build).
    rng: Option<&'a mut dyn RngCore>,
}

impl Builder<'_> {
    fn add(&mut self, name: String, shape: &[usize], init: Init) -> usize {
        let mut t = Tensor::zeros(shape);
        match init {
            Init::Zeros => {}
            Init::Ones => t.data_mut().iter_mut().for_each(|v| *v = 1.0),
            Init::Normal | Init::Embedding => {
                if let Some(rng) = self.rng.as_deref_mut() {
                    for v in t.data_mut() {
                        *v = truncated_normal(rng) * self.std;
                    }
                }
                if matches!(init, Init::Embedding) {
                    let d = shape[1];
                    t.data_mut()[..d].iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        self.names.push(name);
        self.params.push(t);
        self.params.len() - 1
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> (usize, usize) {
        (
            self.add(format!("{prefix}.weight"), &[fan_in, fan_out], Init::Normal),
            self.add(format!("{prefix}.bias"), &[fan_out], Init::Zeros),
        )
    }

    fn norm(&mut self, prefix: &str, d: usize) -> (usize, usize) {
        (
            self.add(format!("{prefix}.gain"), &[d], Init::Ones),
            self.add(format!("{prefix}.bias"), &[d], Init::Zeros),
        )
    }
}

/// Standard normal resampled until it falls within two deviations.
fn truncated_normal(rng: &mut dyn RngCore) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            return z;
        }
    }
}

fn build(cfg: &ModelConfig, rng: Option<&mut dyn RngCore>) -> (Vec<String>, Vec<Tensor>, Layout) {
    let d = cfg.hidden;
    let mut b = Builder {
        names: Vec::new(),
        params: Vec::new(),
        std: cfg.init_std,
        rng,
    };
    let [pv, tv, sv, iv] = cfg.vocabularies();
    let position = b.add("embed.position".into(), &[pv, d], Init::Embedding);
    let token_type = b.add("embed.type".into(), &[tv, d], Init::Embedding);
    let segment = b.add("embed.segment".into(), &[sv, d], Init::Embedding);
    let instance = b.add("embed.instance".into(), &[iv, d], Init::Embedding);
    let mut cls = Vec::new();
    let mut encoders = Vec::new();
    for e in 0..cfg.encoder_count() {
        cls.push(b.add(format!("encoder.{e}.cls"), &[d], Init::Normal));
        let mut blocks = Vec::new();
        for l in 0..cfg.layers {
            let p = format!("encoder.{e}.layer.{l}");
            blocks.push(BlockParams {
                q: b.linear(&format!("{p}.attention.query"), d, d),
                k: b.linear(&format!("{p}.attention.key"), d, d),
                v: b.linear(&format!("{p}.attention.value"), d, d),
                out: b.linear(&format!("{p}.attention.output"), d, d),
                norm1: b.norm(&format!("{p}.attention.norm"), d),
                ff1: b.linear(&format!("{p}.ffn.intermediate"), d, cfg.intermediate),
                ff2: b.linear(&format!("{p}.ffn.output"), cfg.intermediate, d),
                norm2: b.norm(&format!("{p}.ffn.norm"), d),
            });
        }
        encoders.push(blocks);
    }
    let head = b.linear("head", d, cfg.classes);
    let layout = Layout {
        position,
        token_type,
        segment,
        instance,
        cls,
        encoders,
        head,
    };
    (b.names, b.params, layout)
}

impl Model {
    /// Truncated-normal (σ = `init_std`) weights, zero biases, unit norm gains,
    /// zero padding rows.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut rng = rng;
        let (names, params, layout) = build(&config, Some(&mut rng));
        Ok(Self {
            config,
            names,
            params,
            layout,
        })
    }

    /// Rebuilds a model from named tensors, checking names and shapes.
    pub fn from_parts(config: ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let (names, template, layout) = build(&config, None);
        if named.len() != names.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                names.len(),
                named.len()
            )));
        }
        let mut params = Vec::with_capacity(names.len());
        for ((want, tmpl), (name, t)) in names.iter().zip(&template).zip(named) {
            if *want != name || tmpl.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` {:?} does not match expected `{want}` {:?}",
                    t.shape(),
                    tmpl.shape()
                )));
            }
            params.push(t);
        }
        Ok(Self {
            config,
            names,
            params,
            layout,
        })
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &mut self.params[i])
    }

    /// Trainable scalars: everything except embedding padding rows.
    pub fn trainable_scalars(&self) -> usize {
        let d = self.config.hidden;
        let total: usize = self.params.iter().map(Tensor::numel).sum();
        total - 4 * d
    }

    /// Records every parameter on the tape as a gradient-tracking leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.clone(), true))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Architecture, HeadMode};
    use crate::scene::SceneConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_statistics() {
        let cfg = ModelConfig::default();
        let m = Model::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let pos = m.param("embed.position").unwrap();
        assert!(pos.row(0).iter().all(|&v| v == 0.0));
        let w = m.param("encoder.0.layer.0.attention.query.weight").unwrap();
        assert!(w.data().iter().all(|v| v.abs() <= 0.04));
        let mean = w.data().iter().sum::<f64>() / w.numel() as f64;
        let var = w.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.numel() as f64;
        // a normal truncated at 2σ keeps about 77% of the variance
        assert!((var.sqrt() - 0.02 * 0.88).abs() < 0.002, "std {}", var.sqrt());
        assert!(m.param("head.bias").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(m
            .param("encoder.1.layer.3.ffn.norm.gain")
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 1.0));
    }

    #[test]
    fn count_matches_materialized_parameters() {
        for arch in [Architecture::Flat, Architecture::Hierarchical] {
            for (d, heads, layers, inter) in [(8, 2, 2, 16), (128, 4, 4, 128), (1, 1, 1, 1)] {
                let cfg = ModelConfig {
                    architecture: arch,
                    head: HeadMode::Video,
                    hidden: d,
                    heads,
                    layers,
                    intermediate: inter,
                    classes: 5,
                    ..ModelConfig::default()
                };
                let m = Model::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
                assert_eq!(m.trainable_scalars(), cfg.count_parameters());
            }
        }
    }

    #[test]
    fn micro_config_hand_count() {
        let cfg = ModelConfig {
            architecture: Architecture::Hierarchical,
            hidden: 1,
            heads: 1,
            layers: 1,
            intermediate: 1,
            classes: 2,
            scene: SceneConfig {
                grid_width: 2,
                grid_height: 2,
                frames: 2,
                persons: 1,
                objects: 1,
                joints: 2,
                object_points: 2,
            },
            ..ModelConfig::default()
        };
        // embeddings without padding rows: position 4, type 4, segment 2, instance 2
        let embeddings = 4 + 4 + 2 + 2;
        // per block: q,k,v,o (1 weight + 1 bias each) = 8, ffn 2+2, two norms 4
        let block = 8 + 4 + 4;
        let encoders = 2 * block;
        let cls = 2;
        let head = 2 + 2;
        assert_eq!(cfg.count_parameters(), embeddings + encoders + cls + head);
        assert_eq!(cfg.count_parameters(), 50);
    }
}
