//! Per-component feature embedding: encoders map component crops to latent
//! descriptors, decoders map latents back to crop-sized rasters.
//!
//! [`PcaModel`] is the reference embedder. The convolutional
//! [`autoencoder`] implements the same [`ComponentEmbedder`] contract.

pub mod autoencoder;
mod pca;

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::SketchRaster;
use crate::sketch::{ComponentCrop, ComponentKind, ComponentLayout, FaceSketchDecomposition};

pub use pca::{fit_pca, reconstruction_mse, PcaModel};

#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector {
    pub component: ComponentKind,
    pub values: Vec<f64>,
}

impl LatentVector {
    pub fn new(component: ComponentKind, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent vector"));
        }
        Ok(Self { component, values })
    }

    pub fn zeros(component: ComponentKind, d: usize) -> Self {
        Self {
            component,
            values: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `(1 - t) * self + t * other`, the latent-space interpolation used for
    /// morphing and manifold continuity checks.
    pub fn lerp(&self, other: &LatentVector, t: f64) -> Result<LatentVector> {
        if self.component != other.component || self.dim() != other.dim() {
            return Err(Error::dims(
                format!("{} latent of dim {}", self.component, self.dim()),
                format!("{} latent of dim {}", other.component, other.dim()),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        Ok(LatentVector {
            component: self.component,
            values,
        })
    }
}

/// Encoder/decoder pair for one component.
pub trait ComponentEmbedder: Send + Sync {
    fn component(&self) -> ComponentKind;

    /// Crop `(width, height)` the embedder was fitted for.
    fn crop_dims(&self) -> (usize, usize);

    fn latent_dim(&self) -> usize;

    fn encode(&self, crop: &ComponentCrop) -> Result<LatentVector>;

    /// Decoded crop before clamping, row-major.
    fn decode_raw(&self, latent: &LatentVector) -> Result<Vec<f64>>;

    /// Stable content hash of the model parameters.
    fn fingerprint(&self) -> [u8; 32];

    /// Decoded crop clamped into `[0, 1]`.
    fn decode(&self, latent: &LatentVector) -> Result<ComponentCrop> {
        let (w, h) = self.crop_dims();
        let raw = self.decode_raw(latent)?;
        Ok(ComponentCrop::new(
            self.component(),
            SketchRaster::from_clamped(w, h, &raw)?,
        ))
    }
}

/// One embedder per component, indexed by [`ComponentKind::index`].
#[derive(Clone)]
pub struct EmbedderSet {
    embedders: [Arc<dyn ComponentEmbedder>; 5],
}

impl EmbedderSet {
    /// Accepts the five embedders in any order; each kind exactly once.
    pub fn new(embedders: Vec<Arc<dyn ComponentEmbedder>>) -> Result<Self> {
        if embedders.len() != 5 {
            return Err(Error::InvalidInput(format!(
                "need 5 component embedders, got {}",
                embedders.len()
            )));
        }
        let mut slots: [Option<Arc<dyn ComponentEmbedder>>; 5] = Default::default();
        for e in embedders {
            let slot = &mut slots[e.component().index()];
            if slot.is_some() {
                return Err(Error::InvalidInput(format!("duplicate {} embedder", e.component())));
            }
            *slot = Some(e);
        }
        Ok(Self {
            embedders: slots.map(|s| s.expect("all five kinds present")),
        })
    }

    pub fn from_pca(models: Vec<PcaModel>) -> Result<Self> {
        Self::new(
            models
                .into_iter()
                .map(|m| Arc::new(m) as Arc<dyn ComponentEmbedder>)
                .collect(),
        )
    }

    /// Fits one PCA model per component on a decomposed corpus.
    pub fn fit_pca(corpus: &[FaceSketchDecomposition], d: usize) -> Result<Self> {
        let models = ComponentKind::ALL
            .into_iter()
            .map(|kind| {
                let crops: Vec<&ComponentCrop> = corpus.iter().map(|s| s.crop(kind)).collect();
                fit_pca(&crops, d)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pca(models)
    }

    pub fn get(&self, kind: ComponentKind) -> &dyn ComponentEmbedder {
        self.embedders[kind.index()].as_ref()
    }

    /// Checks that every embedder's crop size matches the layout.
    pub fn check_layout(&self, layout: &ComponentLayout) -> Result<()> {
        for kind in ComponentKind::ALL {
            let (have, want) = (self.get(kind).crop_dims(), layout.crop_dims(kind));
            if have != want {
                return Err(Error::dims(
                    format!("{kind} crop {}x{}", want.0, want.1),
                    format!("embedder fitted for {}x{}", have.0, have.1),
                ));
            }
        }
        Ok(())
    }

    pub fn encode_all(&self, decomposition: &FaceSketchDecomposition) -> Result<[LatentVector; 5]> {
        let mut out = Vec::with_capacity(5);
        for kind in ComponentKind::ALL {
            out.push(self.get(kind).encode(decomposition.crop(kind))?);
        }
        Ok(out.try_into().expect("five latents"))
    }

    /// SHA-256 over the five component fingerprints in component order.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for e in &self.embedders {
            h.update(e.fingerprint());
        }
        h.finalize().into()
    }

    /// Writes `<component>.fmem` files for PCA-backed sets.
    pub fn save_pca_dir(models: &[PcaModel], dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for m in models {
            m.save(dir.join(format!("{}.fmem", m.component())))?;
        }
        Ok(())
    }

    pub fn load_pca_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let models = ComponentKind::ALL
            .into_iter()
            .map(|kind| {
                let m = PcaModel::load(dir.join(format!("{kind}.fmem")))?;
                if m.component() != kind {
                    return Err(Error::Corrupt(format!(
                        "{kind}.fmem holds a {} model",
                        m.component()
                    )));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pca(models)
    }
}

impl EmbedderSet {
    /// Loads one model per component from `dir`, taking `<kind>.fmem` (PCA)
    /// if present and `<kind>.fmae` (autoencoder) otherwise.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut models: Vec<Arc<dyn ComponentEmbedder>> = Vec::with_capacity(5);
        for kind in ComponentKind::ALL {
            let pca = dir.join(format!("{kind}.fmem"));
            let model: Arc<dyn ComponentEmbedder> = if pca.exists() {
                Arc::new(PcaModel::load(pca)?)
            } else {
                Arc::new(autoencoder::ConvAutoencoder::load(dir.join(format!("{kind}.fmae")))?)
            };
            if model.component() != kind {
                return Err(Error::Corrupt(format!("model file for {kind} holds a {} model", model.component())));
            }
            models.push(model);
        }
        Self::new(models)
    }
}

impl std::fmt::Debug for EmbedderSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut l = f.debug_list();
        for e in &self.embedders {
            l.entry(&(e.component(), e.crop_dims(), e.latent_dim()));
        }
        l.finish()
    }
}

pub(crate) fn check_latent(e: &dyn ComponentEmbedder, latent: &LatentVector) -> Result<()> {
    if latent.component != e.component() || latent.dim() != e.latent_dim() {
        return Err(Error::dims(
            format!("{} latent of dim {}", e.component(), e.latent_dim()),
            format!("{} latent of dim {}", latent.component, latent.dim()),
        ));
    }
    Ok(())
}

pub(crate) fn check_crop(e: &dyn ComponentEmbedder, crop: &ComponentCrop) -> Result<()> {
    if crop.kind != e.component() || crop.dims() != e.crop_dims() {
        let (w, h) = e.crop_dims();
        return Err(Error::dims(
            format!("{} crop {w}x{h}", e.component()),
            format!("{} crop {}x{}", crop.kind, crop.raster.width(), crop.raster.height()),
        ));
    }
    Ok(())
}
