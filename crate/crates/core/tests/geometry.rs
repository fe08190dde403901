use std::collections::BTreeSet;

mod common;

use common::{locate, random_hole_free_mask};
use keynet::geometry::{
    boundary_oracle, sample_equidistant, trace_contour, BinaryMask, Contour, Pixel, Point,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_closed_cycle(c: &Contour, m: &BinaryMask) {
    let n = c.pixels.len();
    for i in 0..n {
        let (a, b) = (c.pixels[i], c.pixels[(i + 1) % n]);
        assert!(m.get(a));
        if n > 1 {
            let (dx, dy) = ((a.x - b.x).abs(), (a.y - b.y).abs());
            assert!(dx <= 1 && dy <= 1 && (dx, dy) != (0, 0), "{a:?} -> {b:?}");
        }
    }
}

#[test]
fn pavlidis_matches_boundary_oracle_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let (mask, seed) = random_hole_free_mask(&mut rng);
        let contour = trace_contour(&mask, seed).unwrap();
        assert_closed_cycle(&contour, &mask);
        let traced: BTreeSet<Pixel> = contour.pixels.iter().copied().collect();
        let oracle = boundary_oracle(&mask);
        assert!(traced.is_subset(&oracle), "case {case}: traced non-boundary pixel");
        assert_eq!(traced, oracle, "case {case}: {}x{}", mask.width(), mask.height());
        // determinism, independent of which pixel seeds the component
        let other_seed = *oracle.iter().last().unwrap();
        assert_eq!(trace_contour(&mask, other_seed).unwrap(), contour);
    }
}

#[test]
fn traced_contours_are_closed_even_with_holes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let w = rng.random_range(2..=32);
        let h = rng.random_range(2..=32);
        let bits = (0..w * h).map(|_| rng.random_bool(0.55)).collect();
        let mask = BinaryMask::new(w, h, bits).unwrap();
        let Some(seed) = mask.first_foreground() else { continue };
        let c = trace_contour(&mask, seed).unwrap();
        assert_closed_cycle(&c, &mask);
        let traced: BTreeSet<Pixel> = c.pixels.iter().copied().collect();
        assert!(traced.is_subset(&boundary_oracle(&mask)));
    }
}

#[test]
fn equidistant_samples_have_equal_arc_gaps() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 60 {
        let (mask, seed) = random_hole_free_mask(&mut rng);
        let contour = trace_contour(&mask, seed).unwrap();
        // out-and-back walks revisit pixels, so arc coordinates are ambiguous
        let distinct: BTreeSet<_> = contour.pixels.iter().collect();
        if contour.pixels.len() < 3 || distinct.len() != contour.pixels.len() {
            continue;
        }
        checked += 1;
        let pts: Vec<Point> = contour
            .pixels
            .iter()
            .map(|p| Point { x: p.x as f64, y: p.y as f64 })
            .collect();
        let total: f64 = (0..pts.len())
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                (b.x - a.x).hypot(b.y - a.y)
            })
            .sum();
        let k = rng.random_range(1..=24);
        let samples = sample_equidistant(&contour, k).unwrap();
        assert_eq!(samples.len(), k);
        for (i, s) in samples.iter().enumerate() {
            let (arc, dist) = locate(*s, &pts);
            assert!(dist < 1e-9, "sample off polyline by {dist}");
            let expected = total * i as f64 / k as f64;
            assert!(
                (arc - expected).abs() <= 1e-9 * total,
                "sample {i}: arc {arc} expected {expected}"
            );
        }
    }
}
