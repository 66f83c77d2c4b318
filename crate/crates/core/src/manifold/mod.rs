//! Component manifolds sampled by corpus latents: nearest-neighbour
//! retrieval, sum-to-one local reconstruction, projection, and blending of
//! the raw latent with its projection.

mod knn;
mod lle;
mod store_io;

use std::collections::HashSet;

use crate::embed::{EmbedderSet, LatentVector};
use crate::error::{Error, Result};
use crate::raster::SketchRaster;
use crate::sketch::{ComponentKind, ComponentLayout, FaceSketchDecomposition};

pub use knn::{knn, squared_distance, NeighborSet};
pub use lle::{
    solve_lle_weights, SolveMethod, WeightVector, DEFAULT_REGULARIZATION, EXACT_MATCH_DISTANCE,
    MAX_CONDITION,
};

pub const DEFAULT_K: usize = 10;

/// Original component rasters of the corpus, at 8-bit precision.
#[derive(Clone, Debug, PartialEq)]
pub struct CropBank {
    width: usize,
    height: usize,
    levels: Vec<u8>,
}

impl CropBank {
    pub fn new(width: usize, height: usize, levels: Vec<u8>) -> Result<Self> {
        let p = width * height;
        if p == 0 || !levels.len().is_multiple_of(p) {
            return Err(Error::dims(
                format!("a multiple of {p} pixels"),
                format!("{} pixels", levels.len()),
            ));
        }
        Ok(Self { width, height, levels })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.levels.len() / (self.width * self.height)
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self, i: usize) -> &[u8] {
        let p = self.width * self.height;
        &self.levels[i * p..(i + 1) * p]
    }

    pub fn raster(&self, i: usize) -> SketchRaster {
        SketchRaster::from_levels(self.width, self.height, self.levels(i))
            .expect("bank rows match bank dims")
    }
}

/// Latents of one component over the corpus (`N x d`, row-major), with the
/// corpus sample id and optional partition tag of each row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    component: ComponentKind,
    dim: usize,
    vectors: Vec<f64>,
    sample_ids: Vec<u64>,
    tags: Vec<Option<String>>,
    exemplars: Option<CropBank>,
}

impl FeatureSet {
    pub fn new(
        component: ComponentKind,
        dim: usize,
        vectors: Vec<f64>,
        sample_ids: Vec<u64>,
        tags: Vec<Option<String>>,
        exemplars: Option<CropBank>,
    ) -> Result<Self> {
        let n = sample_ids.len();
        if n == 0 {
            return Err(Error::EmptyCorpus);
        }
        if dim == 0 || vectors.len() != n * dim {
            return Err(Error::dims(
                format!("{n} rows of dim {dim}"),
                format!("{} values", vectors.len()),
            ));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature set"));
        }
        if tags.len() != n {
            return Err(Error::dims(format!("{n} tags"), tags.len()));
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = sample_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::InvalidInput(format!("duplicate sample id {dup}")));
        }
        if let Some(bank) = &exemplars {
            if bank.len() != n {
                return Err(Error::dims(format!("{n} exemplar crops"), bank.len()));
            }
        }
        Ok(Self {
            component,
            dim,
            vectors,
            sample_ids,
            tags,
            exemplars,
        })
    }

    pub fn component(&self) -> ComponentKind {
        self.component
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn latent(&self, i: usize) -> LatentVector {
        LatentVector {
            component: self.component,
            values: self.row(i).to_vec(),
        }
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn sample_id(&self, i: usize) -> u64 {
        self.sample_ids[i]
    }

    pub fn sample_ids(&self) -> &[u64] {
        &self.sample_ids
    }

    pub fn tag(&self, i: usize) -> Option<&str> {
        self.tags[i].as_deref()
    }

    pub fn tags(&self) -> &[Option<String>] {
        &self.tags
    }

    pub fn exemplars(&self) -> Option<&CropBank> {
        self.exemplars.as_ref()
    }

    #[inline]
    pub fn matches(&self, i: usize, tag_filter: Option<&str>) -> bool {
        tag_filter.is_none_or(|t| self.tag(i) == Some(t))
    }

    /// Row indices passing the tag filter.
    pub fn filtered(&self, tag_filter: Option<&str>) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.matches(i, tag_filter)).collect()
    }

    pub fn filtered_len(&self, tag_filter: Option<&str>) -> usize {
        match tag_filter {
            None => self.len(),
            Some(_) => (0..self.len()).filter(|&i| self.matches(i, tag_filter)).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMeta {
    pub id: u64,
    pub tag: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoreConfig {
    /// Requested default K; clamped to the corpus size.
    pub default_k: usize,
    /// Keep 8-bit copies of the corpus crops for shadow rendering.
    pub keep_exemplars: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            default_k: DEFAULT_K,
            keep_exemplars: true,
        }
    }
}

/// One feature set per component plus the layout and embedder they were
/// built with. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldStore {
    layout: ComponentLayout,
    embedder_digest: [u8; 32],
    default_k: usize,
    sets: [FeatureSet; 5],
}

impl ManifoldStore {
    pub fn from_parts(
        layout: ComponentLayout,
        embedder_digest: [u8; 32],
        default_k: usize,
        sets: Vec<FeatureSet>,
    ) -> Result<Self> {
        if sets.len() != 5 {
            return Err(Error::InvalidInput(format!("need 5 feature sets, got {}", sets.len())));
        }
        let mut slots: [Option<FeatureSet>; 5] = Default::default();
        for s in sets {
            let slot = &mut slots[s.component().index()];
            if slot.is_some() {
                return Err(Error::InvalidInput(format!("duplicate {} feature set", s.component())));
            }
            *slot = Some(s);
        }
        let sets = slots.map(|s| s.expect("five distinct kinds"));
        let min_n = sets.iter().map(FeatureSet::len).min().unwrap_or(0);
        if default_k == 0 || default_k > min_n {
            return Err(Error::OutOfRange(format!("default K={default_k} not in 1..={min_n}")));
        }
        for s in &sets {
            if let Some(bank) = s.exemplars() {
                let want = layout.crop_dims(s.component());
                if bank.dims() != want {
                    return Err(Error::dims(
                        format!("{} exemplars {}x{}", s.component(), want.0, want.1),
                        format!("{}x{}", bank.dims().0, bank.dims().1),
                    ));
                }
            }
        }
        Ok(Self {
            layout,
            embedder_digest,
            default_k,
            sets,
        })
    }

    pub fn layout(&self) -> &ComponentLayout {
        &self.layout
    }

    pub fn embedder_digest(&self) -> &[u8; 32] {
        &self.embedder_digest
    }

    pub fn default_k(&self) -> usize {
        self.default_k
    }

    pub fn set(&self, kind: ComponentKind) -> &FeatureSet {
        &self.sets[kind.index()]
    }

    pub fn sets(&self) -> &[FeatureSet; 5] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets[0].is_empty()
    }

    /// Accepts K in `1..=N` for the smallest component set.
    pub fn check_k(&self, k: usize) -> Result<()> {
        let n = self.sets.iter().map(FeatureSet::len).min().unwrap_or(0);
        if k == 0 || k > n {
            return Err(Error::OutOfRange(format!("K={k} not in 1..={n}")));
        }
        Ok(())
    }

    /// Accepts a tag filter that leaves at least `k` samples in every set.
    pub fn check_tag(&self, tag: &str, k: usize) -> Result<()> {
        let n = self.sets.iter().map(|s| s.filtered_len(Some(tag))).min().unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidInput(format!("no samples carry tag {tag:?}")));
        }
        if k > n {
            return Err(Error::OutOfRange(format!("K={k} exceeds the {n} samples tagged {tag:?}")));
        }
        Ok(())
    }

    pub fn check_embedders(&self, embedders: &EmbedderSet) -> Result<()> {
        if embedders.digest() != self.embedder_digest {
            return Err(Error::InvalidInput(
                "embedders do not match the ones the store was built with".into(),
            ));
        }
        Ok(())
    }

    pub fn knn(
        &self,
        kind: ComponentKind,
        query: &LatentVector,
        k: usize,
        tag_filter: Option<&str>,
    ) -> Result<NeighborSet> {
        check_component(kind, query)?;
        knn(self.set(kind), &query.values, k, tag_filter)
    }
}

fn check_component(kind: ComponentKind, latent: &LatentVector) -> Result<()> {
    if latent.component != kind {
        return Err(Error::dims(format!("{kind} latent"), format!("{} latent", latent.component)));
    }
    Ok(())
}

/// Encodes every corpus sample with the component embedders.
///
/// `samples` carries the id and tag of each decomposition, in the same
/// order. The default K is clamped to the corpus size.
pub fn build_store(
    embedders: &EmbedderSet,
    corpus: &[FaceSketchDecomposition],
    samples: &[SampleMeta],
    config: &StoreConfig,
) -> Result<ManifoldStore> {
    let first = corpus.first().ok_or(Error::EmptyCorpus)?;
    if samples.len() != corpus.len() {
        return Err(Error::dims(format!("{} sample records", corpus.len()), samples.len()));
    }
    let layout = first.layout().clone();
    embedders.check_layout(&layout)?;
    if let Some(d) = corpus.iter().find(|d| *d.layout() != layout) {
        return Err(Error::InvalidInput(format!(
            "corpus mixes layouts ({}x{} vs {}x{})",
            layout.canvas_width(),
            layout.canvas_height(),
            d.layout().canvas_width(),
            d.layout().canvas_height()
        )));
    }
    let ids: Vec<u64> = samples.iter().map(|s| s.id).collect();
    let tags: Vec<Option<String>> = samples.iter().map(|s| s.tag.clone()).collect();

    let mut sets = Vec::with_capacity(5);
    for kind in ComponentKind::ALL {
        let e = embedders.get(kind);
        let d = e.latent_dim();
        let mut vectors = Vec::with_capacity(corpus.len() * d);
        let mut levels = Vec::new();
        for dec in corpus {
            let crop = dec.crop(kind);
            vectors.extend(e.encode(crop)?.values);
            if config.keep_exemplars {
                levels.extend(crop.raster.to_levels());
            }
        }
        let exemplars = if config.keep_exemplars {
            let (w, h) = layout.crop_dims(kind);
            Some(CropBank::new(w, h, levels)?)
        } else {
            None
        };
        sets.push(FeatureSet::new(kind, d, vectors, ids.clone(), tags.clone(), exemplars)?);
    }
    let k = config.default_k.clamp(1, corpus.len());
    ManifoldStore::from_parts(layout, embedders.digest(), k, sets)
}

/// Result of projecting a latent onto its component manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub latent: LatentVector,
    pub neighbors: NeighborSet,
    pub weights: WeightVector,
}

/// Replaces `query` by the sum-to-one combination of its `k` nearest
/// corpus latents that best reconstructs it.
pub fn project(
    store: &ManifoldStore,
    kind: ComponentKind,
    query: &LatentVector,
    k: usize,
    tag_filter: Option<&str>,
) -> Result<Projection> {
    let neighbors = store.knn(kind, query, k, tag_filter)?;
    let set = store.set(kind);
    let rows: Vec<&[f64]> = neighbors.indices.iter().map(|&i| set.row(i)).collect();
    let weights = solve_lle_weights(&query.values, &rows, DEFAULT_REGULARIZATION)?;
    let latent = LatentVector::new(kind, weights.combine(&rows))?;
    Ok(Projection {
        latent,
        neighbors,
        weights,
    })
}

/// `wb · query + (1 − wb) · projected`.
pub fn blend(query: &LatentVector, projected: &LatentVector, wb: f64) -> Result<LatentVector> {
    if !(0.0..=1.0).contains(&wb) {
        return Err(Error::OutOfRange(format!("blend weight {wb} outside [0, 1]")));
    }
    if query.component != projected.component || query.dim() != projected.dim() {
        return Err(Error::dims(
            format!("{} latent of dim {}", query.component, query.dim()),
            format!("{} latent of dim {}", projected.component, projected.dim()),
        ));
    }
    let values = query
        .values
        .iter()
        .zip(&projected.values)
        .map(|(q, p)| wb * q + (1.0 - wb) * p)
        .collect();
    Ok(LatentVector {
        component: query.component,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_d_store(points: &[[f64; 2]]) -> ManifoldStore {
        let sets = ComponentKind::ALL
            .into_iter()
            .map(|kind| {
                FeatureSet::new(
                    kind,
                    2,
                    points.iter().flatten().copied().collect(),
                    (0..points.len() as u64).collect(),
                    vec![None; points.len()],
                    None,
                )
                .unwrap()
            })
            .collect();
        ManifoldStore::from_parts(ComponentLayout::default(), [0; 32], points.len(), sets).unwrap()
    }

    fn lv(v: &[f64]) -> LatentVector {
        LatentVector::new(ComponentKind::Nose, v.to_vec()).unwrap()
    }

    #[test]
    fn projection_of_stored_point_is_identity() {
        let s = two_d_store(&[[0.3, 0.1], [1.0, -2.0], [4.0, 4.0]]);
        for i in 0..3 {
            let q = s.set(ComponentKind::Nose).latent(i);
            let p = project(&s, ComponentKind::Nose, &q, 2, None).unwrap();
            assert_eq!(p.latent, q);
        }
    }

    #[test]
    fn two_neighbour_projections() {
        let s = two_d_store(&[[1.0, 0.0], [0.0, 1.0]]);
        let p = project(&s, ComponentKind::Nose, &lv(&[0.0, 0.0]), 2, None).unwrap();
        assert!((p.latent.values[0] - 0.5).abs() < 1e-12);
        assert!((p.latent.values[1] - 0.5).abs() < 1e-12);

        let s = two_d_store(&[[1.0, 0.0], [2.0, 0.0]]);
        let p = project(&s, ComponentKind::Nose, &lv(&[0.0, 0.0]), 2, None).unwrap();
        assert!(p.latent.values.iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn projection_rejects_wrong_component() {
        let s = two_d_store(&[[1.0, 0.0], [2.0, 0.0]]);
        let q = LatentVector::new(ComponentKind::Mouth, vec![0.0, 0.0]).unwrap();
        assert!(project(&s, ComponentKind::Nose, &q, 1, None).is_err());
    }

    #[test]
    fn blend_cases() {
        let q = lv(&[1.0, 1.0]);
        let p = lv(&[0.0, 0.0]);
        assert_eq!(blend(&q, &p, 0.25).unwrap().values, vec![0.25, 0.25]);
        assert_eq!(blend(&q, &p, 1.0).unwrap(), q);
        assert_eq!(blend(&q, &p, 0.0).unwrap(), p);
        assert!(blend(&q, &p, 1.5).is_err());
        assert!(blend(&q, &p, -0.1).is_err());
        assert!(blend(&q, &lv(&[0.0]), 0.5).is_err());
    }

    #[test]
    fn feature_set_invariants() {
        let ok = FeatureSet::new(ComponentKind::Nose, 1, vec![0.0, 1.0], vec![1, 2], vec![None, None], None);
        assert!(ok.is_ok());
        assert!(FeatureSet::new(ComponentKind::Nose, 1, vec![0.0, 1.0], vec![1, 1], vec![None, None], None).is_err());
        assert!(FeatureSet::new(ComponentKind::Nose, 1, vec![], vec![], vec![], None).is_err());
        assert!(FeatureSet::new(ComponentKind::Nose, 2, vec![0.0, 1.0], vec![1, 2], vec![None, None], None).is_err());
    }

    #[test]
    fn store_rejects_oversized_default_k() {
        let sets: Vec<_> = ComponentKind::ALL
            .into_iter()
            .map(|kind| FeatureSet::new(kind, 1, vec![0.0, 1.0], vec![0, 1], vec![None, None], None).unwrap())
            .collect();
        assert!(ManifoldStore::from_parts(ComponentLayout::default(), [0; 32], 3, sets.clone()).is_err());
        assert!(ManifoldStore::from_parts(ComponentLayout::default(), [0; 32], 2, sets).is_ok());
    }
}
