#![allow(dead_code)]

use std::sync::Arc;

use facemanifold::corpus::{sample_seed, Corpus};
use facemanifold::embed::EmbedderSet;
use facemanifold::manifold::{build_store, SampleMeta, StoreConfig};
use facemanifold::sketch::synthetic::synthesize_face;
use facemanifold::sketch::{ComponentLayout, FaceStyle};
use facemanifold::Stroke;
use facemanifold_service::{Engine, SessionManager};

pub const SEED: u64 = 17;

pub struct Fixture {
    pub corpus: Corpus,
    pub engine: Arc<Engine>,
}

pub fn fixture(n: usize, d: usize) -> Fixture {
    let layout = ComponentLayout::default();
    let corpus = Corpus::synthetic(n, SEED, &layout, &FaceStyle::default());
    let decomps = corpus.decompose_all().unwrap();
    let embedders = EmbedderSet::fit_pca(&decomps, d).unwrap();
    let meta: Vec<SampleMeta> = corpus
        .samples
        .iter()
        .map(|s| SampleMeta { id: s.id, tag: s.tag.clone() })
        .collect();
    let store = build_store(&embedders, &decomps, &meta, &StoreConfig::default()).unwrap();
    Fixture {
        corpus,
        engine: Arc::new(Engine::new(store, embedders, 4).unwrap()),
    }
}

pub fn manager(f: &Fixture) -> SessionManager {
    SessionManager::new(Some(f.engine.clone()), None).unwrap()
}

/// The strokes the generator used to draw corpus sample `i`.
pub fn sample_strokes(i: u64) -> Vec<Stroke> {
    synthesize_face(sample_seed(SEED, i), &ComponentLayout::default(), &FaceStyle::default()).strokes
}
