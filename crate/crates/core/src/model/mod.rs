//! Token embeddings, multi-head self-attention, and the flat and
//! hierarchical encoders with video- and actor-level heads.

mod checkpoint;
mod config;
mod forward;
mod layers;
mod params;

pub use checkpoint::MAGIC;
pub use config::{Architecture, HeadMode, ModelConfig};
pub use forward::{DropoutKey, Forward, ForwardOptions, Logits};
pub use layers::attention;
pub use params::Model;

use crate::numeric::sigmoid;

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Video mode: the argmax class and the softmax distribution.
    Class { index: usize, probabilities: Vec<f64> },
    /// Actor mode: independent per-class sigmoid scores.
    Scores(Vec<f64>),
}

/// Turns one row of logits into a prediction for the given head mode.
pub fn classify(logits: &[f64], mode: HeadMode) -> Prediction {
    match mode {
        HeadMode::Video => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
            let total: f64 = exp.iter().sum();
            let probabilities: Vec<f64> = exp.iter().map(|e| e / total).collect();
            // first maximum wins ties
            let index = probabilities
                .iter()
                .enumerate()
                .fold(0, |best, (i, &p)| if p > probabilities[best] { i } else { best });
            Prediction::Class {
                index,
                probabilities,
            }
        }
        HeadMode::Actor => Prediction::Scores(logits.iter().map(|&z| sigmoid(z)).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn video_argmax() {
        match classify(&[2.0, 1.0, 0.0], HeadMode::Video) {
            Prediction::Class { index, probabilities } => {
                assert_eq!(index, 0);
                assert!((probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn actor_scores_at_zero() {
        assert_eq!(
            classify(&[0.0; 3], HeadMode::Actor),
            Prediction::Scores(vec![0.5; 3])
        );
    }

    #[test]
    fn raising_a_logit_never_lowers_its_score() {
        let base = [0.3, -1.2, 2.0];
        for mode in [HeadMode::Video, HeadMode::Actor] {
            for c in 0..3 {
                let mut up = base;
                up[c] += 1.0;
                let score = |p: Prediction| match p {
                    Prediction::Class { probabilities, .. } => probabilities[c],
                    Prediction::Scores(s) => s[c],
                };
                assert!(score(classify(&up, mode)) >= score(classify(&base, mode)));
            }
        }
    }
}
