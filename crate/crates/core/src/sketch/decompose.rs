use super::{ComponentKind, ComponentLayout};
use crate::error::{Error, Result};
use crate::raster::SketchRaster;

/// One component image: a window-sized crop for the facial parts, or the
/// full canvas with the facial windows erased for the remainder.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentCrop {
    pub kind: ComponentKind,
    pub raster: SketchRaster,
}

impl ComponentCrop {
    pub fn new(kind: ComponentKind, raster: SketchRaster) -> Self {
        Self { kind, raster }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.raster.dims()
    }
}

/// Exactly one crop per component, stored in [`ComponentKind::ALL`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceSketchDecomposition {
    layout: ComponentLayout,
    crops: [ComponentCrop; 5],
}

impl FaceSketchDecomposition {
    /// Assembles a decomposition from crops given in any order.
    pub fn from_crops(layout: ComponentLayout, crops: Vec<ComponentCrop>) -> Result<Self> {
        if crops.len() != 5 {
            return Err(Error::InvalidInput(format!("expected 5 crops, got {}", crops.len())));
        }
        let mut slots: [Option<ComponentCrop>; 5] = Default::default();
        for crop in crops {
            let expected = layout.crop_dims(crop.kind);
            if crop.dims() != expected {
                return Err(Error::dims(
                    format!("{} crop {}x{}", crop.kind, expected.0, expected.1),
                    format!("{}x{}", crop.raster.width(), crop.raster.height()),
                ));
            }
            let slot = &mut slots[crop.kind.index()];
            if slot.is_some() {
                return Err(Error::InvalidInput(format!("duplicate {} crop", crop.kind)));
            }
            *slot = Some(crop);
        }
        let crops = slots.map(|c| c.expect("five distinct kinds fill all slots"));
        Ok(Self { layout, crops })
    }

    pub fn layout(&self) -> &ComponentLayout {
        &self.layout
    }

    pub fn crop(&self, kind: ComponentKind) -> &ComponentCrop {
        &self.crops[kind.index()]
    }

    pub fn crops(&self) -> &[ComponentCrop; 5] {
        &self.crops
    }
}

/// Splits a sketch into its five component images.
///
/// Facial crops are exact copies of their windows. The remainder is the
/// full sketch with every pixel inside any facial window set to zero.
pub fn decompose(sketch: &SketchRaster, layout: &ComponentLayout) -> Result<FaceSketchDecomposition> {
    if sketch.dims() != layout.canvas() {
        return Err(Error::dims(
            format!("{}x{} canvas", layout.canvas_width(), layout.canvas_height()),
            format!("{}x{} sketch", sketch.width(), sketch.height()),
        ));
    }
    let crop = |kind: ComponentKind| {
        let w = layout.window(kind);
        let mut ink = Vec::with_capacity(w.area());
        for y in w.y0..w.y1 {
            let row = y * sketch.width();
            ink.extend_from_slice(&sketch.ink()[row + w.x0..row + w.x1]);
        }
        ComponentCrop::new(
            kind,
            SketchRaster::new(w.width(), w.height(), ink).expect("window lies inside canvas"),
        )
    };
    let mut remainder = sketch.clone();
    for y in 0..sketch.height() {
        for x in 0..sketch.width() {
            if layout.in_facial_window(x, y) {
                remainder.set(x, y, 0.0);
            }
        }
    }
    Ok(FaceSketchDecomposition {
        layout: layout.clone(),
        crops: [
            crop(ComponentKind::LeftEye),
            crop(ComponentKind::RightEye),
            crop(ComponentKind::Nose),
            crop(ComponentKind::Mouth),
            ComponentCrop::new(ComponentKind::Remainder, remainder),
        ],
    })
}

/// Reassembles a sketch-domain preview: every pixel comes from the
/// highest-priority component whose window covers it.
pub fn compose_preview(decomposition: &FaceSketchDecomposition) -> SketchRaster {
    let layout = decomposition.layout();
    let (cw, ch) = layout.canvas();
    let mut out = SketchRaster::blank(cw, ch);
    for y in 0..ch {
        for x in 0..cw {
            let kind = layout.owner(x, y);
            let w = layout.window(kind);
            let v = decomposition.crop(kind).raster.get(x - w.x0, y - w.y0);
            out.set(x, y, v);
        }
    }
    out
}
