use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Integer pixel coordinate, `x` to the right and `y` downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub x: i64,
    pub y: i64,
}

impl Pixel {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

/// Row-major boolean grid; `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid(format!("mask extents {width}x{height}")));
        }
        if bits.len() != width * height {
            return Err(Error::Shape(format!(
                "{}x{} mask needs {} bits, got {}",
                width,
                height,
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    /// Parses rows of `#` (foreground) and `.` (background).
    pub fn from_ascii(art: &str) -> Result<Self> {
        let rows: Vec<&str> = art
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let width = rows.first().map_or(0, |r| r.len());
        let mut bits = Vec::with_capacity(width * rows.len());
        for r in &rows {
            if r.len() != width {
                return Err(Error::Shape("ragged mask rows".into()));
            }
            bits.extend(r.chars().map(|c| c == '#'));
        }
        Self::new(width, rows.len(), bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Out-of-image pixels read as background.
    pub fn get(&self, p: Pixel) -> bool {
        self.contains(p) && self.bits[p.y as usize * self.width + p.x as usize]
    }

    pub fn set(&mut self, p: Pixel, value: bool) {
        if self.contains(p) {
            self.bits[p.y as usize * self.width + p.x as usize] = value;
        }
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// First foreground pixel in raster order.
    pub fn first_foreground(&self) -> Option<Pixel> {
        self.bits
            .iter()
            .position(|&b| b)
            .map(|i| Pixel::new((i % self.width) as i64, (i / self.width) as i64))
    }

    pub fn foreground(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| Pixel::new((i % self.width) as i64, (i / self.width) as i64))
    }

    /// The 8-connected component containing `seed`, as its own mask.
    pub fn component(&self, seed: Pixel) -> Result<BinaryMask> {
        if !self.get(seed) {
            return Err(Error::Invalid(format!(
                "seed ({}, {}) is not foreground",
                seed.x, seed.y
            )));
        }
        let mut out = BinaryMask::empty(self.width, self.height)?;
        let mut stack = vec![seed];
        out.set(seed, true);
        while let Some(p) = stack.pop() {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let q = Pixel::new(p.x + dx, p.y + dy);
                    if self.get(q) && !out.get(q) {
                        out.set(q, true);
                        stack.push(q);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_pgm(&bytes)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_pgm()).map_err(|e| Error::io(path, e))
    }

    /// Binary (P5) encoding with values 0 and 255.
    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }

    /// Decodes P5 or P2. A sample is foreground when it is at least half of 255
    /// after scaling by the header's maximum value.
    pub fn decode_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut header = Vec::with_capacity(4);
        while header.len() < 4 {
            let tok = next_token(bytes, &mut pos)
                .ok_or_else(|| Error::Invalid("truncated PGM header".into()))?;
            header.push(tok);
        }
        let magic = header[0].as_str();
        let num = |s: &str, what: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Invalid(format!("PGM {what} `{s}` is not a number")))
        };
        let width = num(&header[1], "width")?;
        let height = num(&header[2], "height")?;
        let maxval = num(&header[3], "maxval")?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Invalid(format!("PGM maxval {maxval}")));
        }
        let fg = |v: usize| v * 255 >= 128 * maxval;
        let count = width * height;
        let bits = match magic {
            "P5" => {
                // exactly one whitespace byte separates header from raster
                pos += 1;
                let bps = if maxval < 256 { 1 } else { 2 };
                let raster = bytes
                    .get(pos..pos + count * bps)
                    .ok_or_else(|| Error::Invalid("truncated PGM raster".into()))?;
                if bps == 1 {
                    raster.iter().map(|&v| fg(v as usize)).collect()
                } else {
                    raster
                        .chunks(2)
                        .map(|c| fg(((c[0] as usize) << 8) | c[1] as usize))
                        .collect()
                }
            }
            "P2" => {
                let mut bits = Vec::with_capacity(count);
                for _ in 0..count {
                    let tok = next_token(bytes, &mut pos)
                        .ok_or_else(|| Error::Invalid("truncated PGM raster".into()))?;
                    bits.push(fg(num(&tok, "sample")?));
                }
                bits
            }
            other => return Err(Error::Invalid(format!("unsupported PGM magic `{other}`"))),
        };
        Self::new(width, height, bits)
    }
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Foreground pixels with at least one background 4-neighbour, where
/// out-of-image counts as background.
pub fn boundary_oracle(mask: &BinaryMask) -> BTreeSet<Pixel> {
    mask.foreground()
        .filter(|p| {
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|(dx, dy)| !mask.get(Pixel::new(p.x + dx, p.y + dy)))
        })
        .collect()
}
