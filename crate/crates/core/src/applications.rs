//! Face morphing by latent interpolation and component copy-paste.

use std::path::Path;

use crate::embed::{EmbedderSet, LatentVector};
use crate::error::{Error, Result};
use crate::fusion::{fuse_latents, render_preview, FusedCanvas};
use crate::raster::SketchRaster;
use crate::sketch::{ComponentKind, ComponentLayout, FaceSketchDecomposition};

/// Latents, fused canvas and clamped preview of one synthesized face.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub latents: [LatentVector; 5],
    pub canvas: FusedCanvas,
    pub preview: SketchRaster,
}

/// Renders five component latents through map, fuse and preview.
pub fn synthesize(
    embedders: &EmbedderSet,
    latents: [LatentVector; 5],
    layout: &ComponentLayout,
    channels: usize,
) -> Result<Reconstruction> {
    let canvas = fuse_latents(embedders, &latents, layout, channels)?;
    let preview = render_preview(&canvas);
    Ok(Reconstruction {
        latents,
        canvas,
        preview,
    })
}

/// Encodes every component of a sketch and renders it back.
pub fn reconstruct(
    embedders: &EmbedderSet,
    decomposition: &FaceSketchDecomposition,
    channels: usize,
) -> Result<Reconstruction> {
    let latents = embedders.encode_all(decomposition)?;
    synthesize(embedders, latents, decomposition.layout(), channels)
}

fn check_same_layout(a: &FaceSketchDecomposition, b: &FaceSketchDecomposition) -> Result<()> {
    if a.layout() != b.layout() {
        return Err(Error::InvalidInput("morph sources use different layouts".into()));
    }
    Ok(())
}

/// One frame with its own interpolation parameter per component.
pub fn morph_frame(
    embedders: &EmbedderSet,
    a: &FaceSketchDecomposition,
    b: &FaceSketchDecomposition,
    t: [f64; 5],
    channels: usize,
) -> Result<Reconstruction> {
    check_same_layout(a, b)?;
    if let Some(v) = t.iter().find(|v| !v.is_finite()) {
        return Err(Error::OutOfRange(format!("interpolation parameter {v}")));
    }
    let (fa, fb) = (embedders.encode_all(a)?, embedders.encode_all(b)?);
    let mut latents = Vec::with_capacity(5);
    for i in 0..5 {
        latents.push(fa[i].lerp(&fb[i], t[i])?);
    }
    synthesize(
        embedders,
        latents.try_into().expect("five latents"),
        a.layout(),
        channels,
    )
}

/// `steps` frames at `t = i / (steps − 1)`, the same `t` for every
/// component. The first and last frames are the reconstructions of `a` and
/// `b`.
pub fn morph_sequence(
    embedders: &EmbedderSet,
    a: &FaceSketchDecomposition,
    b: &FaceSketchDecomposition,
    steps: usize,
    channels: usize,
) -> Result<Vec<Reconstruction>> {
    if steps < 2 {
        return Err(Error::OutOfRange(format!("morph needs at least 2 steps, got {steps}")));
    }
    check_same_layout(a, b)?;
    let (fa, fb) = (embedders.encode_all(a)?, embedders.encode_all(b)?);
    (0..steps)
        .map(|i| {
            let t = i as f64 / (steps - 1) as f64;
            let mut latents = Vec::with_capacity(5);
            for c in 0..5 {
                latents.push(fa[c].lerp(&fb[c], t)?);
            }
            synthesize(
                embedders,
                latents.try_into().expect("five latents"),
                a.layout(),
                channels,
            )
        })
        .collect()
}

/// Writes `frame-NNNN.pgm` for every frame.
pub fn write_frames(frames: &[Reconstruction], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        f.preview.write_pgm(dir.join(format!("frame-{i:04}.pgm")))?;
    }
    Ok(())
}

/// Builds a face from components of several sources: each of the five kinds
/// must be assigned exactly once. Assignment order is irrelevant.
pub fn recombine_components(
    embedders: &EmbedderSet,
    assignments: &[(ComponentKind, &FaceSketchDecomposition)],
    channels: usize,
) -> Result<Reconstruction> {
    let mut chosen: [Option<&FaceSketchDecomposition>; 5] = [None; 5];
    for &(kind, src) in assignments {
        if chosen[kind.index()].replace(src).is_some() {
            return Err(Error::InvalidInput(format!("{kind} assigned more than once")));
        }
    }
    let mut latents = Vec::with_capacity(5);
    let mut layout: Option<&ComponentLayout> = None;
    for kind in ComponentKind::ALL {
        let src = chosen[kind.index()].ok_or_else(|| Error::InvalidInput(format!("no source for {kind}")))?;
        match layout {
            Some(l) if l != src.layout() => {
                return Err(Error::InvalidInput("recombination sources use different layouts".into()))
            }
            _ => layout = Some(src.layout()),
        }
        latents.push(embedders.get(kind).encode(src.crop(kind))?);
    }
    synthesize(
        embedders,
        latents.try_into().expect("five latents"),
        layout.expect("five sources"),
        channels,
    )
}
