//! `.knd` line-delimited annotation files, raw-clip conversion and the
//! synthetic clip generator.

mod format;
mod pipeline;
mod synth;

pub use format::{
    canonical_line, load_clips, parse_knd, read_knd, round6, save_knd, write_knd, ActorRecord,
    ClipRecord, FrameRecord, Header, HumanRecord, KeypointsRecord, ObjectRecord, PersonRecord,
    Record, SceneRecord, TokensRecord,
};
pub use pipeline::{
    clip_detections, clip_ground_truth, clip_objects, clip_to_scene, track_clip, MaskDir,
    MaskSource, PipelineConfig,
};
pub use synth::{
    ambiguous_pairs, generate_synthetic, nearest_centroid_accuracy, AmbiguityReport, ClassSpec,
    Motion, ObjectShape, SynthClip, SynthDataset, SynthSpec, SKELETON, SKELETON_FLIP,
};
