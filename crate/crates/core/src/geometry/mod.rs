//! Object keypoints from binary masks: outer-contour tracing and
//! equal arc-length sub-sampling.

mod contour;
mod mask;

pub use contour::{sample_equidistant, trace_contour, trace_first_component, Contour, Point};
pub use mask::{boundary_oracle, BinaryMask, Pixel};

/// Default number of keypoints sampled per object contour.
pub const DEFAULT_OBJECT_KEYPOINTS: usize = 8;

/// Traces the seed's component and samples `k` keypoints along it.
pub fn object_keypoints(mask: &BinaryMask, seed: Pixel, k: usize) -> crate::Result<Vec<Point>> {
    let contour = trace_contour(mask, seed)?;
    sample_equidistant(&contour, k)
}
