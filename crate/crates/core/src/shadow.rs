//! Shadow guidance: per component, blend the original corpus crops of the
//! K nearest neighbours of the user's crop into a faint overlay.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embed::EmbedderSet;
use crate::error::{Error, Result};
use crate::manifold::{knn, ManifoldStore, EXACT_MATCH_DISTANCE};
use crate::raster::SketchRaster;
use crate::sketch::{decompose, ComponentKind};

/// Guard added to neighbour distances before inversion.
pub const DISTANCE_GUARD: f64 = 1e-6;

/// Crops with less total ink than this count as blank.
pub const BLANK_INK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BlendMode {
    /// `w_k ∝ 1 / (d_k + δ)`.
    #[default]
    InverseDistance,
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowOptions<'a> {
    pub k: usize,
    pub tag_filter: Option<&'a str>,
    pub mode: BlendMode,
}

impl ShadowOptions<'_> {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            tag_filter: None,
            mode: BlendMode::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentShadow {
    pub component: ComponentKind,
    /// Blend at window size.
    pub raster: SketchRaster,
    pub neighbor_ids: Vec<u64>,
    /// Non-negative, summing to one, aligned with `neighbor_ids`.
    pub weights: Vec<f64>,
    /// The query crop was blank, so the whole corpus was averaged.
    pub blank_query: bool,
}

impl ComponentShadow {
    pub fn entropy(&self) -> f64 {
        weight_entropy(&self.weights)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowOverlay {
    pub k: usize,
    pub components: [ComponentShadow; 5],
    /// Per-pixel maximum of the placed component shadows.
    pub composite: SketchRaster,
}

impl ShadowOverlay {
    pub fn component(&self, kind: ComponentKind) -> &ComponentShadow {
        &self.components[kind.index()]
    }

    /// `name=value` lines: K, then ids and weights per component.
    pub fn report(&self) -> String {
        let mut s = format!("k={}\n", self.k);
        for c in &self.components {
            let ids: Vec<String> = c.neighbor_ids.iter().map(u64::to_string).collect();
            let ws: Vec<String> = c.weights.iter().map(|w| format!("{w:.9e}")).collect();
            let _ = writeln!(s, "{}.blank={}", c.component, c.blank_query);
            let _ = writeln!(s, "{}.ids={}", c.component, ids.join(","));
            let _ = writeln!(s, "{}.weights={}", c.component, ws.join(","));
        }
        s
    }

    /// Writes `<component>.pgm`, `composite.pgm` and `shadow.txt`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for c in &self.components {
            c.raster.write_pgm(dir.join(format!("{}.pgm", c.component)))?;
        }
        self.composite.write_pgm(dir.join("composite.pgm"))?;
        fs::write(dir.join("shadow.txt"), self.report())?;
        Ok(())
    }
}

/// Shannon entropy (nats) of a weight vector; zero weights contribute 0.
pub fn weight_entropy(weights: &[f64]) -> f64 {
    -weights.iter().filter(|w| **w > 0.0).map(|w| w * w.ln()).sum::<f64>()
}

/// Blend weights for neighbours at the given ascending distances.
pub fn blend_weights(distances: &[f64], mode: BlendMode) -> Vec<f64> {
    if let Some(j) = distances.iter().position(|d| *d < EXACT_MATCH_DISTANCE) {
        let mut w = vec![0.0; distances.len()];
        w[j] = 1.0;
        return w;
    }
    let raw: Vec<f64> = match mode {
        BlendMode::InverseDistance => distances.iter().map(|d| 1.0 / (d + DISTANCE_GUARD)).collect(),
        BlendMode::Uniform => vec![1.0; distances.len()],
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub fn compute_shadow(
    store: &ManifoldStore,
    embedders: &EmbedderSet,
    sketch: &SketchRaster,
    options: &ShadowOptions<'_>,
) -> Result<ShadowOverlay> {
    store.check_embedders(embedders)?;
    let layout = store.layout();
    let decomposition = decompose(sketch, layout)?;

    let mut components = Vec::with_capacity(5);
    for kind in ComponentKind::ALL {
        let set = store.set(kind);
        let bank = set.exemplars().ok_or(Error::MissingExemplars(kind.name()))?;
        let crop = decomposition.crop(kind);

        let blank_query = crop.raster.ink_mass() < BLANK_INK;
        let (rows, weights) = if blank_query {
            let rows = set.filtered(options.tag_filter);
            if rows.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no {kind} samples match tag filter {:?}",
                    options.tag_filter
                )));
            }
            let w = vec![1.0 / rows.len() as f64; rows.len()];
            (rows, w)
        } else {
            let latent = embedders.get(kind).encode(crop)?;
            let nb = knn(set, &latent.values, options.k, options.tag_filter)?;
            let w = blend_weights(&nb.distances, options.mode);
            (nb.indices, w)
        };

        let (w, h) = bank.dims();
        let mut acc = vec![0.0; w * h];
        for (&row, &wk) in rows.iter().zip(&weights) {
            if wk == 0.0 {
                continue;
            }
            for (a, &l) in acc.iter_mut().zip(bank.levels(row)) {
                *a += wk * crate::raster::from_level(l);
            }
        }
        components.push(ComponentShadow {
            component: kind,
            raster: SketchRaster::from_clamped(w, h, &acc)?,
            neighbor_ids: rows.iter().map(|&r| set.sample_id(r)).collect(),
            weights,
            blank_query,
        });
    }

    let (cw, ch) = layout.canvas();
    let mut composite = vec![0.0f64; cw * ch];
    for c in &components {
        let win = layout.window(c.component);
        for y in 0..win.height() {
            for x in 0..win.width() {
                let dst = &mut composite[(win.y0 + y) * cw + win.x0 + x];
                *dst = dst.max(c.raster.get(x, y));
            }
        }
    }
    Ok(ShadowOverlay {
        k: options.k,
        components: components.try_into().expect("five components"),
        composite: SketchRaster::new(cw, ch, composite)?,
    })
}
