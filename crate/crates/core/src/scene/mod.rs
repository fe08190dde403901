//! Scene-sequence representation, its four token streams, keypoint-space
//! augmentation and class-balanced sampling.

mod augment;
mod sampler;
mod tokenize;
mod types;

pub use augment::{augment, crop, expand, flip, AugmentPolicy, CROP_SCALE, MAX_EXPAND};
pub use sampler::{uniform_sample_indices, weighted_sample_indices};
pub use tokenize::{quantize_position, tokenize_scene, TokenizedScene};
pub use types::{HumanTrack, Keypoint, SceneConfig, SceneSequence, JOINT_CONFIDENCE_THRESHOLD};
