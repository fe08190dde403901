use std::collections::HashSet;

use super::mask::{BinaryMask, Pixel};
use crate::error::{Error, Result};

/// Closed 8-connected boundary walk; the last pixel is adjacent to the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub pixels: Vec<Pixel>,
}

/// Floating-point point in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    fn step(self) -> (i64, i64) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    fn left(self) -> Self {
        match self {
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
            Heading::East => Heading::North,
        }
    }

    fn right(self) -> Self {
        self.left().left().left()
    }
}

fn offset(p: Pixel, d: (i64, i64)) -> Pixel {
    Pixel::new(p.x + d.0, p.y + d.1)
}

/// Traces the outer boundary of the seed's 8-connected component.
///
/// The walk starts at the component's uppermost-leftmost pixel facing north.
/// At each pixel it inspects front-left, front and front-right in that order,
/// stepping to the first foreground one (a front-left step also turns left).
/// When all three are background it turns right in place; three consecutive
/// turns mean an isolated pixel. The walk ends when it is back on the start
/// pixel with the start heading.
pub fn trace_contour(mask: &BinaryMask, seed: Pixel) -> Result<Contour> {
    if mask.is_empty() {
        return Err(Error::Invalid("cannot trace an empty mask".into()));
    }
    let component = mask.component(seed)?;
    let start = component
        .first_foreground()
        .expect("component contains the seed");

    let start_heading = Heading::North;
    let mut pos = start;
    let mut heading = start_heading;
    let mut pixels = vec![start];
    let mut rotations = 0;
    let mut seen = HashSet::new();
    loop {
        let fwd = offset(pos, heading.step());
        let p1 = offset(fwd, heading.left().step());
        let p3 = offset(fwd, heading.right().step());
        if component.get(p1) {
            pos = p1;
            heading = heading.left();
            rotations = 0;
        } else if component.get(fwd) {
            pos = fwd;
            rotations = 0;
        } else if component.get(p3) {
            pos = p3;
            rotations = 0;
        } else {
            heading = heading.right();
            rotations += 1;
            if rotations == 3 {
                break;
            }
            if pos == start && heading == start_heading {
                break;
            }
            continue;
        }
        if pos == start && heading == start_heading {
            break;
        }
        // a repeated (pixel, heading) state means the walk has closed on itself
        if !seen.insert((pos, heading)) {
            break;
        }
        pixels.push(pos);
    }
    // drop a trailing start pixel so the cycle closes implicitly
    while pixels.len() > 1 && pixels.last() == Some(&start) {
        pixels.pop();
    }
    Ok(Contour { pixels })
}

/// Traces the component containing the first foreground pixel in raster order.
pub fn trace_first_component(mask: &BinaryMask) -> Result<Contour> {
    let seed = mask
        .first_foreground()
        .ok_or_else(|| Error::Invalid("cannot trace an empty mask".into()))?;
    trace_contour(mask, seed)
}

/// Samples `k` points at arc positions `i·L/k` along the closed polyline
/// through the contour's pixel centres, starting at the first pixel.
pub fn sample_equidistant(contour: &Contour, k: usize) -> Result<Vec<Point>> {
    if k == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let pts: Vec<Point> = contour
        .pixels
        .iter()
        .map(|p| Point {
            x: p.x as f64,
            y: p.y as f64,
        })
        .collect();
    let Some(&first) = pts.first() else {
        return Err(Error::Invalid("cannot sample an empty contour".into()));
    };
    let n = pts.len();
    let seg_len = |i: usize| {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        (b.x - a.x).hypot(b.y - a.y)
    };
    let total: f64 = (0..n).map(seg_len).sum();
    if n == 1 || total == 0.0 {
        return Ok(vec![first; k]);
    }

    let mut out = Vec::with_capacity(k);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for i in 0..k {
        let target = total * i as f64 / k as f64;
        while seg < n - 1 && seg_start + seg_len(seg) <= target {
            seg_start += seg_len(seg);
            seg += 1;
        }
        let len = seg_len(seg);
        let t = if len > 0.0 {
            ((target - seg_start) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (pts[seg], pts[(seg + 1) % n]);
        out.push(Point {
            x: a.x + t * (b.x - a.x),
            y: a.y + t * (b.y - a.y),
        });
    }
    Ok(out)
}
