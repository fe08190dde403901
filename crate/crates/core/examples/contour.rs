//! Traces the outer contour of a binary mask and samples equidistant keypoints.
//!
//! cargo run --example contour -- [mask.pgm] [k]
//!
//! Without a path, an L-shaped mask drawn in ASCII is used.

use keynet::geometry::{object_keypoints, sample_equidistant, trace_contour, BinaryMask};

fn main() -> keynet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mask = match args.first() {
        Some(path) => BinaryMask::read_pgm(path)?,
        None => BinaryMask::from_ascii(
            "..........
             .##.......
             .##.......
             .##.......
             .#######..
             .#######..
             ..........",
        )?,
    };
    let k: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);

    let seed = mask
        .first_foreground()
        .ok_or_else(|| keynet::Error::Invalid("mask has no foreground".into()))?;
    let contour = trace_contour(&mask, seed)?;
    println!("{}x{} mask, contour of {} pixels", mask.width(), mask.height(), contour.pixels.len());
    for p in &contour.pixels {
        print!("({},{}) ", p.x, p.y);
    }
    println!();

    let points = sample_equidistant(&contour, k)?;
    println!("{k} equidistant keypoints:");
    for p in &points {
        println!("  {:8.3} {:8.3}", p.x, p.y);
    }
    // same thing in one call, as the data pipeline does it
    assert_eq!(points, object_keypoints(&mask, seed, k)?);
    Ok(())
}
