//! Links raw per-frame detections of one synthetic clip into tracklets, keeps
//! the most confident ones and sub-samples them to a lower frame rate.
//!
//! cargo run --example tracking -- [iou] [n] [fps]

use keynet::data::{clip_detections, generate_synthetic, SynthSpec};
use keynet::tracking::{link_from_keyframe, select_top_n, subsample_frames, temporal_footprint};

fn main() -> keynet::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let iou = args.first().copied().unwrap_or(0.5);
    let n = args.get(1).map_or(2, |&v| v as usize);
    let fps = args.get(2).copied().unwrap_or(5.0);

    let mut spec = SynthSpec::multi_actor(1);
    spec.clips_per_class = 1;
    let ds = generate_synthetic(&spec)?;
    let clip = &ds.clips().next().expect("one clip per class").record;
    let frames = clip_detections(clip)?;
    println!(
        "clip {}: {} frames at {} FPS, keyframe {}, {} detections",
        clip.id,
        frames.len(),
        clip.fps,
        clip.keyframe,
        frames.iter().map(Vec::len).sum::<usize>()
    );

    let tracks = link_from_keyframe(&frames, clip.keyframe, iou)?;
    println!("{} tracklets at IOU >= {iou}", tracks.len());
    for t in &tracks {
        println!("  #{} covers {:2} frames, confidence {:.3}", t.id, t.len(), t.confidence);
    }

    let kept = select_top_n(tracks, n)?;
    let sub = subsample_frames(&kept, frames.len(), clip.fps, fps, clip.keyframe)?;
    println!(
        "top {n}, sub-sampled with stride {}: frames {:?}, keyframe slot {} ({:.1}s footprint for {} frames)",
        sub.stride,
        sub.frames,
        sub.keyframe,
        temporal_footprint(sub.frames.len(), fps),
        sub.frames.len()
    );
    for t in &sub.tracklets {
        let occupancy: String = t.entries.iter().map(|e| if e.is_some() { '#' } else { '.' }).collect();
        println!("  #{} {occupancy}", t.id);
    }
    Ok(())
}
