//! Latent-to-feature-map conversion and depth-ordered merging onto the
//! canvas, plus a clamped preview render.
//!
//! Channel 0 of every map is the decoded crop before clamping. Channels 1
//! and 2 are its forward horizontal and vertical differences (zero on the
//! last column/row); any further channels are zero.

use std::fs;
use std::path::Path;

use crate::embed::{ComponentEmbedder, EmbedderSet, LatentVector};
use crate::error::{Error, Result};
use crate::raster::SketchRaster;
use crate::sketch::{ComponentKind, ComponentLayout};

pub const DEFAULT_CHANNELS: usize = 8;

/// Fixed merge priority, highest first.
pub const DEPTH_ORDER: [ComponentKind; 5] = ComponentKind::ALL;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub component: ComponentKind,
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    /// `channels × height × width`, row-major within a channel.
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(component: ComponentKind, channels: usize, width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || data.len() != channels * width * height {
            return Err(Error::dims(
                format!("{channels}x{height}x{width} map"),
                format!("{} values", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self {
            component,
            channels,
            width,
            height,
            data,
        })
    }

    pub fn zeros(component: ComponentKind, channels: usize, width: usize, height: usize) -> Self {
        Self {
            component,
            channels,
            width,
            height,
            data: vec![0.0; channels * width * height],
        }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.width * self.height;
        &self.data[c * p..(c + 1) * p]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedCanvas {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    /// Winning component per pixel, row-major.
    pub provenance: Vec<ComponentKind>,
}

impl FusedCanvas {
    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.width * self.height;
        &self.data[c * p..(c + 1) * p]
    }

    /// Writes `channel-NN.pgm` (clamped to `[0, 1]`) for every channel and
    /// `provenance.pgm` with intensity `50 × component index`.
    pub fn write_debug_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for c in 0..self.channels {
            SketchRaster::from_clamped(self.width, self.height, self.channel(c))?
                .write_pgm(dir.join(format!("channel-{c:02}.pgm")))?;
        }
        let mut pgm = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        pgm.extend(self.provenance.iter().map(|k| (k.index() * 50) as u8));
        fs::write(dir.join("provenance.pgm"), pgm)?;
        Ok(())
    }
}

/// Decodes a latent into a `channels`-deep feature map.
pub fn map_latent(embedder: &dyn ComponentEmbedder, latent: &LatentVector, channels: usize) -> Result<FeatureMap> {
    if channels == 0 {
        return Err(Error::OutOfRange("feature map needs at least one channel".into()));
    }
    if latent.component != embedder.component() {
        return Err(Error::dims(
            format!("{} latent", embedder.component()),
            format!("{} latent", latent.component),
        ));
    }
    let (w, h) = embedder.crop_dims();
    let base = embedder.decode_raw(latent)?;
    let p = w * h;
    let mut data = vec![0.0; channels * p];
    data[..p].copy_from_slice(&base);
    if channels > 1 {
        let gx = &mut data[p..2 * p];
        for y in 0..h {
            for x in 0..w.saturating_sub(1) {
                gx[y * w + x] = base[y * w + x + 1] - base[y * w + x];
            }
        }
    }
    if channels > 2 {
        let gy = &mut data[2 * p..3 * p];
        for y in 0..h.saturating_sub(1) {
            for x in 0..w {
                gy[y * w + x] = base[(y + 1) * w + x] - base[y * w + x];
            }
        }
    }
    FeatureMap::new(latent.component, channels, w, h, data)
}

/// Maps all five latents (one per component, any order).
pub fn map_latents(embedders: &EmbedderSet, latents: &[LatentVector], channels: usize) -> Result<Vec<FeatureMap>> {
    latents
        .iter()
        .map(|l| map_latent(embedders.get(l.component), l, channels))
        .collect()
}

/// Places each map at its window and merges them by [`DEPTH_ORDER`]: each
/// pixel takes every channel from the highest-priority component whose
/// window covers it. Input order does not matter.
pub fn fuse(maps: &[FeatureMap], layout: &ComponentLayout) -> Result<FusedCanvas> {
    if maps.len() != 5 {
        return Err(Error::InvalidInput(format!("need 5 feature maps, got {}", maps.len())));
    }
    let mut by_kind: [Option<&FeatureMap>; 5] = [None; 5];
    for m in maps {
        let slot = &mut by_kind[m.component.index()];
        if slot.is_some() {
            return Err(Error::InvalidInput(format!("duplicate {} feature map", m.component)));
        }
        if (m.width, m.height) != layout.crop_dims(m.component) {
            let (w, h) = layout.crop_dims(m.component);
            return Err(Error::dims(
                format!("{} map {w}x{h}", m.component),
                format!("{}x{}", m.width, m.height),
            ));
        }
        *slot = Some(m);
    }
    let by_kind = by_kind.map(|m| m.expect("five distinct kinds"));
    let channels = by_kind[0].channels;
    if let Some(m) = by_kind.iter().find(|m| m.channels != channels) {
        return Err(Error::dims(format!("{channels} channels"), format!("{} ({})", m.channels, m.component)));
    }

    let (cw, ch) = layout.canvas();
    let p = cw * ch;
    let provenance = layout.owner_map();
    let mut data = vec![0.0; channels * p];
    for y in 0..ch {
        for x in 0..cw {
            let kind = provenance[y * cw + x];
            let win = layout.window(kind);
            let m = by_kind[kind.index()];
            let src = (y - win.y0) * m.width + (x - win.x0);
            let mp = m.width * m.height;
            for c in 0..channels {
                data[c * p + y * cw + x] = m.data[c * mp + src];
            }
        }
    }
    Ok(FusedCanvas {
        channels,
        width: cw,
        height: ch,
        data,
        provenance,
    })
}

/// Channel 0 clamped into `[0, 1]`.
pub fn render_preview(canvas: &FusedCanvas) -> SketchRaster {
    SketchRaster::from_clamped(canvas.width, canvas.height, canvas.channel(0))
        .expect("canvas channel matches canvas dims")
}

/// `fuse ∘ map_latent` over five component latents.
pub fn fuse_latents(
    embedders: &EmbedderSet,
    latents: &[LatentVector],
    layout: &ComponentLayout,
    channels: usize,
) -> Result<FusedCanvas> {
    fuse(&map_latents(embedders, latents, channels)?, layout)
}
