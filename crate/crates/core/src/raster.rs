//! Single-channel ink rasters, binary PGM I/O and anti-aliased stroke
//! rasterization.
//!
//! Ink polarity is inverted with respect to ordinary grayscale images:
//! `0.0` is blank paper and `1.0` is full ink, so a zero-initialised buffer
//! is an empty canvas. Files written by [`SketchRaster::to_pgm`] store
//! `round(255 * ink)`; importing a regular black-on-white scan needs
//! [`SketchRaster::inverted`].

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Number of quantisation levels used by 8-bit rasters and PGM files.
pub const LEVELS: f64 = 255.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SketchRaster {
    width: usize,
    height: usize,
    ink: Vec<f64>,
}

impl SketchRaster {
    pub fn new(width: usize, height: usize, ink: Vec<f64>) -> Result<Self> {
        if ink.len() != width * height {
            return Err(Error::dims(
                format!("{} pixels ({width}x{height})", width * height),
                format!("{} pixels", ink.len()),
            ));
        }
        if let Some(v) = ink.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("ink intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, ink })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ink: vec![0.0; width * height],
        }
    }

    /// Builds a raster by clamping arbitrary real values into `[0, 1]`.
    /// NaN maps to blank.
    pub fn from_clamped(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let ink = values
            .iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(width, height, ink)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ink(&self) -> &[f64] {
        &self.ink
    }

    pub fn into_ink(self) -> Vec<f64> {
        self.ink
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.ink[y * self.width + x]
    }

    #[inline]
    pub(crate) fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!((0.0..=1.0).contains(&v));
        self.ink[y * self.width + x] = v;
    }

    /// Total ink mass (sum of intensities).
    pub fn ink_mass(&self) -> f64 {
        self.ink.iter().sum()
    }

    pub fn is_blank(&self, threshold: f64) -> bool {
        self.ink_mass() < threshold
    }

    /// Swaps polarity (`1 - ink`), for importing black-on-white images.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            ink: self.ink.iter().map(|v| 1.0 - v).collect(),
        }
    }

    /// Rounds every pixel to the nearest 8-bit level.
    pub fn quantized(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            ink: self.ink.iter().map(|&v| from_level(to_level(v))).collect(),
        }
    }

    pub fn to_levels(&self) -> Vec<u8> {
        self.ink.iter().map(|&v| to_level(v)).collect()
    }

    pub fn from_levels(width: usize, height: usize, levels: &[u8]) -> Result<Self> {
        Self::new(width, height, levels.iter().map(|&l| from_level(l)).collect())
    }

    /// Encodes as binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_levels());
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut cursor = PgmCursor { bytes, pos: 0 };
        if cursor.token()? != b"P5" {
            return Err(Error::InvalidInput("not a binary PGM (missing P5 magic)".into()));
        }
        let width = cursor.number()?;
        let height = cursor.number()?;
        let maxval = cursor.number()?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::InvalidInput(format!("unsupported PGM maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the pixels
        cursor.pos += 1;
        let data = bytes
            .get(cursor.pos..cursor.pos + width * height)
            .ok_or_else(|| Error::InvalidInput("PGM pixel data truncated".into()))?;
        if maxval == 255 {
            Self::from_levels(width, height, data)
        } else {
            let scale = maxval as f64;
            Self::new(
                width,
                height,
                data.iter().map(|&v| (v as f64 / scale).min(1.0)).collect(),
            )
        }
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pgm(&fs::read(path)?)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_pgm())?;
        Ok(())
    }

    /// Rasterizes a stroke in place.
    ///
    /// Coverage is computed per pixel centre from the distance to the
    /// polyline (`width / 2 + 0.5 - dist`, clamped to `[0, 1]`) and quantized
    /// to 8-bit levels, so canvases built from strokes round-trip through PGM
    /// bit-exactly. Drawing keeps the per-pixel maximum; erasing caps the ink
    /// at `1 - coverage`.
    pub fn draw_stroke(&mut self, stroke: &Stroke) -> Result<()> {
        stroke.validate(self.width, self.height)?;
        let half = stroke.width / 2.0 + 0.5;
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in &stroke.points {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        let x_lo = (min_x - half).floor().max(0.0) as usize;
        let y_lo = (min_y - half).floor().max(0.0) as usize;
        let x_hi = ((max_x + half).ceil().max(0.0) as usize).min(self.width);
        let y_hi = ((max_y + half).ceil().max(0.0) as usize).min(self.height);

        for py in y_lo..y_hi {
            for px in x_lo..x_hi {
                let c = (px as f64 + 0.5, py as f64 + 0.5);
                let dist = stroke
                    .points
                    .windows(2)
                    .map(|seg| segment_distance(c, seg[0], seg[1]))
                    .fold(f64::INFINITY, f64::min);
                let level = to_level((half - dist).clamp(0.0, 1.0));
                if level == 0 {
                    continue;
                }
                let old = to_level(self.get(px, py));
                let new = if stroke.erase {
                    old.min(255 - level)
                } else {
                    old.max(level)
                };
                self.set(px, py, from_level(new));
            }
        }
        Ok(())
    }
}

#[inline]
pub fn to_level(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * LEVELS).round() as u8
}

#[inline]
pub fn from_level(l: u8) -> f64 {
    l as f64 / LEVELS
}

/// A freehand stroke: an ordered polyline in canvas pixel coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Stroke {
    pub points: Vec<(f64, f64)>,
    pub width: f64,
    pub erase: bool,
}

impl Stroke {
    pub fn new(points: Vec<(f64, f64)>, width: f64) -> Self {
        Self {
            points,
            width,
            erase: false,
        }
    }

    pub fn eraser(points: Vec<(f64, f64)>, width: f64) -> Self {
        Self {
            points,
            width,
            erase: true,
        }
    }

    /// At least two points, all within `[0, width] x [0, height]`, and a
    /// positive finite stroke width.
    pub fn validate(&self, canvas_width: usize, canvas_height: usize) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "stroke needs at least 2 points, got {}",
                self.points.len()
            )));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidInput(format!("invalid stroke width {}", self.width)));
        }
        let (w, h) = (canvas_width as f64, canvas_height as f64);
        for &(x, y) in &self.points {
            if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 || x > w || y > h {
                return Err(Error::OutOfRange(format!(
                    "stroke point ({x}, {y}) outside {canvas_width}x{canvas_height} canvas"
                )));
            }
        }
        Ok(())
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::InvalidInput("PGM header truncated".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidInput("malformed PGM header field".into()))
    }
}
