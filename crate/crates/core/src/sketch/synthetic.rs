//! Deterministic procedural face sketches.
//!
//! Each face is a list of strokes (outline, eyes and brows, nose, mouth,
//! hair) laid out relative to the component windows, then rasterized with
//! [`SketchRaster::draw_stroke`]. Because the stroke list is exposed, the
//! exact same raster can be reproduced by replaying the strokes on a blank
//! canvas, e.g. through an interactive session.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ComponentKind, ComponentLayout, Window};
use crate::raster::{SketchRaster, Stroke};

/// Knobs for the generator. Stroke width is given for a 64-pixel canvas and
/// scales with the canvas size.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceStyle {
    pub stroke_width: f64,
    /// Multiplier on all random shape variation; 0 gives a fixed template.
    pub variation: f64,
    pub hair: bool,
    pub brows: bool,
}

impl Default for FaceStyle {
    fn default() -> Self {
        Self {
            stroke_width: 1.0,
            variation: 1.0,
            hair: true,
            brows: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticFace {
    pub seed: u64,
    /// Partition label: "A" for short hair, "B" for long hair.
    pub tag: String,
    pub strokes: Vec<Stroke>,
    pub raster: SketchRaster,
}

pub fn generate_synthetic_face(seed: u64, layout: &ComponentLayout, style: &FaceStyle) -> SketchRaster {
    synthesize_face(seed, layout, style).raster
}

pub fn synthesize_face(seed: u64, layout: &ComponentLayout, style: &FaceStyle) -> SyntheticFace {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        variation: style.variation,
    };
    let (cw, ch) = layout.canvas();
    let (w, h) = (cw as f64, ch as f64);
    let width = style.stroke_width * w.min(h) / 64.0;
    let mut paths: Vec<Vec<(f64, f64)>> = Vec::new();

    // face outline
    let fcx = w * (0.5 + g.jit(0.02));
    let fcy = h * (0.53 + g.jit(0.02));
    let frx = w * (0.35 + g.jit(0.035));
    let fry = h * (0.41 + g.jit(0.035));
    paths.push(arc(fcx, fcy, frx, fry, 0.0, 2.0 * PI, 40));

    // eyes share their shape parameters, with a little per-eye jitter
    let eye_dx = g.jit(0.07);
    let eye_cy = 0.62 + g.jit(0.06);
    let eye_rx = 0.28 + g.jit(0.06);
    let eye_ry = 0.15 + g.jit(0.05);
    let brow_y = 0.24 + g.jit(0.06);
    let brow_bend = 0.08 + g.jit(0.06);
    for (kind, mirror) in [(ComponentKind::LeftEye, 1.0), (ComponentKind::RightEye, -1.0)] {
        let win = layout.window(kind);
        let cx = fx(win, 0.5 + mirror * eye_dx + g.jit(0.015));
        let cy = fy(win, eye_cy + g.jit(0.015));
        let rx = win.width() as f64 * eye_rx;
        let ry = win.height() as f64 * eye_ry;
        paths.push(arc(cx, cy, rx, ry, 0.0, 2.0 * PI, 16));
        let pr = (ry * 0.55).max(0.6);
        paths.push(arc(cx, cy, pr, pr, 0.0, 2.0 * PI, 8));
        if style.brows {
            let by = fy(win, brow_y);
            let bend = win.height() as f64 * brow_bend;
            paths.push(quad(
                (cx - rx * 1.15, by + bend),
                (cx, by - bend),
                (cx + rx * 1.15, by + bend * (1.0 + g.jit(0.3))),
                8,
            ));
        }
    }

    // nose: bridge, tip hook, and nostrils
    let nose = layout.window(ComponentKind::Nose);
    let nx = fx(nose, 0.5 + g.jit(0.06));
    let tilt = nose.width() as f64 * g.jit(0.08);
    let top = fy(nose, 0.35 + g.jit(0.05));
    let tip = fy(nose, 0.72 + g.jit(0.05));
    let nw = nose.width() as f64 * (0.16 + g.jit(0.05));
    paths.push(vec![(nx, top), (nx + tilt, tip), (nx + tilt - nw * 0.6, tip + 1.0)]);
    paths.push(quad(
        (nx - nw * 1.2, tip - 1.0),
        (nx - nw * 0.9, tip + 1.5),
        (nx - nw * 0.2, tip + 1.2),
        5,
    ));
    paths.push(quad(
        (nx + nw * 0.4, tip + 1.2),
        (nx + nw * 1.0, tip + 1.5),
        (nx + nw * 1.3, tip - 1.0),
        5,
    ));

    // mouth: lower curve plus lip line
    let mouth = layout.window(ComponentKind::Mouth);
    let mx = fx(mouth, 0.5 + g.jit(0.05));
    let my = fy(mouth, 0.52 + g.jit(0.08));
    let mw = mouth.width() as f64 * (0.28 + g.jit(0.07));
    let smile = mouth.height() as f64 * (0.08 + g.jit(0.16));
    paths.push(quad((mx - mw, my), (mx, my + 2.0 * smile), (mx + mw, my), 9));
    paths.push(quad(
        (mx - mw * 0.9, my),
        (mx, my - mouth.height() as f64 * (0.12 + g.jit(0.06))),
        (mx + mw * 0.9, my),
        7,
    ));

    // hair
    let long_hair = g.rng.random_bool(0.5);
    if style.hair {
        let strands = 3 + g.rng.random_range(0..3);
        for i in 0..strands {
            let grow = 1.04 + 0.05 * i as f64 + g.jit(0.02);
            let a0 = PI * (1.05 + g.jit(0.05).abs());
            let a1 = PI * (1.95 - g.jit(0.05).abs());
            paths.push(arc(fcx, fcy - fry * 0.05, frx * grow, fry * grow, a0, a1, 14));
        }
        if long_hair {
            for side in [-1.0, 1.0] {
                let x = fcx + side * frx * (1.08 + g.jit(0.04));
                paths.push(quad(
                    (x, fcy - fry * 0.2),
                    (x + side * w * 0.04, fcy + fry * 0.4),
                    (x + side * w * 0.02, h * (0.97 + g.jit(0.02))),
                    8,
                ));
            }
        }
    }

    let clamp = |(x, y): (f64, f64)| (x.clamp(0.0, w), y.clamp(0.0, h));
    let strokes: Vec<Stroke> = paths
        .into_iter()
        .map(|p| Stroke::new(p.into_iter().map(clamp).collect(), width))
        .collect();
    let mut raster = SketchRaster::blank(cw, ch);
    for s in &strokes {
        raster
            .draw_stroke(s)
            .expect("generated strokes are clamped to the canvas");
    }
    SyntheticFace {
        seed,
        tag: if long_hair { "B" } else { "A" }.to_string(),
        strokes,
        raster,
    }
}

struct Gen {
    rng: ChaCha8Rng,
    variation: f64,
}

impl Gen {
    /// Uniform draw in `[-amp, amp]`, scaled by the style's variation.
    fn jit(&mut self, amp: f64) -> f64 {
        let u: f64 = self.rng.random_range(-1.0..=1.0);
        u * amp * self.variation
    }
}

fn fx(w: Window, f: f64) -> f64 {
    w.x0 as f64 + w.width() as f64 * f
}

fn fy(w: Window, f: f64) -> f64 {
    w.y0 as f64 + w.height() as f64 * f
}

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, a0: f64, a1: f64, n: usize) -> Vec<(f64, f64)> {
    (0..=n)
        .map(|i| {
            let a = a0 + (a1 - a0) * i as f64 / n as f64;
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

fn quad(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), n: usize) -> Vec<(f64, f64)> {
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let (a, b, c) = ((1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t);
            (a * p0.0 + b * p1.0 + c * p2.0, a * p0.1 + b * p1.1 + c * p2.1)
        })
        .collect()
}
