//! Drawing sessions over a shared read-only store.
//!
//! Each session owns a canvas, five blend weights, K, an optional tag filter
//! and a revision counter that grows by one on every mutation. Results are
//! computed from a snapshot taken under the session lock and published only
//! if no newer result is already cached, so a slow computation can never
//! overwrite the view of a later revision.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use facemanifold::applications::{synthesize, Reconstruction};
use facemanifold::embed::EmbedderSet;
use facemanifold::manifold::{blend, project, ManifoldStore};
use facemanifold::shadow::{compute_shadow, BlendMode, ShadowOptions, ShadowOverlay};
use facemanifold::sketch::{decompose, ComponentKind};
use facemanifold::{SketchRaster, Stroke};
use tokio::sync::broadcast;
use uuid::Uuid;

use crate::ServiceError;

pub type SessionId = Uuid;

/// The loaded store, its embedders and the feature-map depth.
pub struct Engine {
    pub store: ManifoldStore,
    pub embedders: EmbedderSet,
    pub channels: usize,
}

impl Engine {
    pub fn new(store: ManifoldStore, embedders: EmbedderSet, channels: usize) -> Result<Self, ServiceError> {
        store.check_embedders(&embedders)?;
        embedders.check_layout(store.layout())?;
        if channels == 0 {
            return Err(ServiceError::BadRequest("feature maps need at least one channel".into()));
        }
        Ok(Self {
            store,
            embedders,
            channels,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SessionConfig {
    pub k: Option<usize>,
    pub tag_filter: Option<String>,
    /// Recompute and push after every mutation. When off, results are only
    /// produced on request (the "convert" workflow).
    pub auto_update: Option<bool>,
    pub weights: Option<[f64; 5]>,
    pub shadow_mode: Option<BlendMode>,
}

/// Partial update of session settings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SettingsUpdate {
    pub k: Option<usize>,
    /// `Some(None)` clears the filter.
    pub tag_filter: Option<Option<String>>,
    pub auto_update: Option<bool>,
}

/// Consistent copy of everything a result depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub revision: u64,
    pub canvas: SketchRaster,
    pub weights: [f64; 5],
    pub k: usize,
    pub tag_filter: Option<String>,
    pub shadow_mode: BlendMode,
    pub auto_update: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    pub revision: u64,
    pub reconstruction: Reconstruction,
    /// Corpus ids of the projection neighbours, per component.
    pub neighbor_ids: [Vec<u64>; 5],
    /// Reconstruction weights of the projection, per component.
    pub neighbor_weights: [Vec<f64>; 5],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionResult {
    pub revision: u64,
    pub shadow: ShadowOverlay,
    pub synthesis: Synthesis,
}

struct SessionState {
    canvas: SketchRaster,
    weights: [f64; 5],
    k: usize,
    tag_filter: Option<String>,
    shadow_mode: BlendMode,
    auto_update: bool,
    revision: u64,
    latest: Option<Arc<SessionResult>>,
}

impl SessionState {
    fn snapshot(&self) -> Snapshot {
        Snapshot {
            revision: self.revision,
            canvas: self.canvas.clone(),
            weights: self.weights,
            k: self.k,
            tag_filter: self.tag_filter.clone(),
            shadow_mode: self.shadow_mode,
            auto_update: self.auto_update,
        }
    }
}

pub struct Session {
    state: Mutex<SessionState>,
    updates: broadcast::Sender<Arc<SessionResult>>,
}

impl Session {
    fn lock(&self) -> std::sync::MutexGuard<'_, SessionState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub struct SessionManager {
    engine: Option<Arc<Engine>>,
    sessions: RwLock<HashMap<SessionId, Arc<Session>>>,
    default_k: usize,
}

fn check_weights(weights: &[f64; 5]) -> Result<(), ServiceError> {
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(ServiceError::BadRequest(format!("blend weight {w} outside [0, 1]")));
    }
    Ok(())
}

impl SessionManager {
    /// `default_k` of `None` uses the store's default.
    pub fn new(engine: Option<Arc<Engine>>, default_k: Option<usize>) -> Result<Self, ServiceError> {
        let default_k = match (&engine, default_k) {
            (Some(e), Some(k)) => {
                e.store.check_k(k)?;
                k
            }
            (Some(e), None) => e.store.default_k(),
            (None, k) => k.unwrap_or(facemanifold::manifold::DEFAULT_K),
        };
        Ok(Self {
            engine,
            sessions: RwLock::new(HashMap::new()),
            default_k,
        })
    }

    pub fn engine(&self) -> Result<&Arc<Engine>, ServiceError> {
        self.engine.as_ref().ok_or(ServiceError::NoStore)
    }

    pub fn default_k(&self) -> usize {
        self.default_k
    }

    fn session(&self, id: SessionId) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&id)
            .cloned()
            .ok_or(ServiceError::UnknownSession(id))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, config: SessionConfig) -> Result<SessionId, ServiceError> {
        let engine = self.engine()?;
        let k = config.k.unwrap_or(self.default_k);
        engine.store.check_k(k)?;
        let weights = config.weights.unwrap_or([0.0; 5]);
        check_weights(&weights)?;
        if let Some(tag) = &config.tag_filter {
            engine.store.check_tag(tag, k)?;
        }
        let (cw, ch) = engine.store.layout().canvas();
        let (tx, _) = broadcast::channel(16);
        let session = Session {
            state: Mutex::new(SessionState {
                canvas: SketchRaster::blank(cw, ch),
                weights,
                k,
                tag_filter: config.tag_filter,
                shadow_mode: config.shadow_mode.unwrap_or_default(),
                auto_update: config.auto_update.unwrap_or(true),
                revision: 0,
                latest: None,
            }),
            updates: tx,
        };
        let id = Uuid::new_v4();
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, Arc::new(session));
        Ok(id)
    }

    pub fn remove(&self, id: SessionId) -> Result<(), ServiceError> {
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .remove(&id)
            .map(|_| ())
            .ok_or(ServiceError::UnknownSession(id))
    }

    pub fn snapshot(&self, id: SessionId) -> Result<Snapshot, ServiceError> {
        Ok(self.session(id)?.lock().snapshot())
    }

    pub fn subscribe(&self, id: SessionId) -> Result<broadcast::Receiver<Arc<SessionResult>>, ServiceError> {
        Ok(self.session(id)?.updates.subscribe())
    }

    fn mutate(
        &self,
        id: SessionId,
        f: impl FnOnce(&mut SessionState) -> Result<(), ServiceError>,
    ) -> Result<Snapshot, ServiceError> {
        let s = self.session(id)?;
        let mut st = s.lock();
        f(&mut st)?;
        st.revision += 1;
        Ok(st.snapshot())
    }

    /// Rasterises a stroke onto the canvas and returns the new revision.
    pub fn apply_stroke(&self, id: SessionId, stroke: &Stroke) -> Result<Snapshot, ServiceError> {
        self.mutate(id, |st| {
            st.canvas.draw_stroke(stroke)?;
            Ok(())
        })
    }

    pub fn set_weights(&self, id: SessionId, weights: [f64; 5]) -> Result<Snapshot, ServiceError> {
        check_weights(&weights)?;
        self.mutate(id, |st| {
            st.weights = weights;
            Ok(())
        })
    }

    pub fn update_settings(&self, id: SessionId, update: SettingsUpdate) -> Result<Snapshot, ServiceError> {
        let engine = self.engine()?.clone();
        self.mutate(id, |st| {
            let k = update.k.unwrap_or(st.k);
            engine.store.check_k(k)?;
            let tag = update.tag_filter.clone().unwrap_or_else(|| st.tag_filter.clone());
            if let Some(t) = &tag {
                engine.store.check_tag(t, k)?;
            }
            st.k = k;
            st.tag_filter = tag;
            if let Some(a) = update.auto_update {
                st.auto_update = a;
            }
            Ok(())
        })
    }

    /// Replaces the canvas with a blank one.
    pub fn clear(&self, id: SessionId) -> Result<Snapshot, ServiceError> {
        self.mutate(id, |st| {
            let (w, h) = st.canvas.dims();
            st.canvas = SketchRaster::blank(w, h);
            Ok(())
        })
    }

    /// Computes shadow and synthesis for a snapshot. Touches no session.
    pub fn compute(&self, snap: &Snapshot) -> Result<SessionResult, ServiceError> {
        let engine = self.engine()?;
        compute_result(engine, snap)
    }

    /// Caches and broadcasts `result` unless the session has moved past its
    /// revision. Returns whether it was published.
    pub fn publish(&self, id: SessionId, result: Arc<SessionResult>) -> Result<bool, ServiceError> {
        let s = self.session(id)?;
        let mut st = s.lock();
        if result.revision < st.revision {
            return Ok(false);
        }
        if st.latest.as_ref().is_some_and(|l| l.revision >= result.revision) {
            return Ok(false);
        }
        st.latest = Some(result.clone());
        // no subscribers is fine
        let _ = s.updates.send(result);
        Ok(true)
    }

    /// The result for the current revision, computing it if the cache is
    /// stale.
    pub fn current_result(&self, id: SessionId) -> Result<Arc<SessionResult>, ServiceError> {
        let snap = {
            let s = self.session(id)?;
            let st = s.lock();
            if let Some(r) = st.latest.as_ref().filter(|r| r.revision == st.revision) {
                return Ok(r.clone());
            }
            st.snapshot()
        };
        let result = Arc::new(self.compute(&snap)?);
        self.publish(id, result.clone())?;
        Ok(result)
    }

    /// Recomputes after a mutation when the session is in auto-update mode.
    pub fn refresh_if_auto(&self, id: SessionId, snap: &Snapshot) -> Result<Option<Arc<SessionResult>>, ServiceError> {
        if !snap.auto_update {
            return Ok(None);
        }
        let result = Arc::new(self.compute(snap)?);
        self.publish(id, result.clone())?;
        Ok(Some(result))
    }

    /// Writes `canvas.pgm`, `shadow.pgm`, `synthesis.pgm` and `session.txt`
    /// into `root/relative`. `relative` must stay inside `root`.
    pub fn export(&self, id: SessionId, root: &Path, relative: &str) -> Result<Vec<PathBuf>, ServiceError> {
        let rel = Path::new(relative);
        if relative.is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(ServiceError::BadRequest(format!("export path {relative:?} must be a plain relative path")));
        }
        let snap = self.snapshot(id)?;
        let result = self.result_for(id, &snap)?;
        let dir = root.join(rel);
        fs::create_dir_all(&dir).map_err(facemanifold::Error::from)?;
        let files = [
            (dir.join("canvas.pgm"), snap.canvas.to_pgm()),
            (dir.join("shadow.pgm"), result.shadow.composite.to_pgm()),
            (dir.join("synthesis.pgm"), result.synthesis.reconstruction.preview.to_pgm()),
            (dir.join("session.txt"), session_report(id, &snap, &result).into_bytes()),
        ];
        for (p, bytes) in &files {
            fs::write(p, bytes).map_err(facemanifold::Error::from)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }

    fn result_for(&self, id: SessionId, snap: &Snapshot) -> Result<Arc<SessionResult>, ServiceError> {
        let cached = self.session(id)?.lock().latest.clone();
        match cached {
            Some(r) if r.revision == snap.revision => Ok(r),
            _ => Ok(Arc::new(self.compute(snap)?)),
        }
    }
}

pub fn compute_result(engine: &Engine, snap: &Snapshot) -> Result<SessionResult, ServiceError> {
    let store = &engine.store;
    let tag = snap.tag_filter.as_deref();
    let shadow = compute_shadow(
        store,
        &engine.embedders,
        &snap.canvas,
        &ShadowOptions {
            k: snap.k,
            tag_filter: tag,
            mode: snap.shadow_mode,
        },
    )?;

    let decomposition = decompose(&snap.canvas, store.layout())?;
    let mut latents = Vec::with_capacity(5);
    let mut ids: [Vec<u64>; 5] = Default::default();
    let mut weights: [Vec<f64>; 5] = Default::default();
    for kind in ComponentKind::ALL {
        let q = engine.embedders.get(kind).encode(decomposition.crop(kind))?;
        let p = project(store, kind, &q, snap.k, tag)?;
        let set = store.set(kind);
        ids[kind.index()] = p.neighbors.indices.iter().map(|&i| set.sample_id(i)).collect();
        weights[kind.index()] = p.weights.weights.clone();
        latents.push(blend(&q, &p.latent, snap.weights[kind.index()])?);
    }
    let reconstruction = synthesize(
        &engine.embedders,
        latents.try_into().expect("five latents"),
        store.layout(),
        engine.channels,
    )?;
    Ok(SessionResult {
        revision: snap.revision,
        shadow,
        synthesis: Synthesis {
            revision: snap.revision,
            reconstruction,
            neighbor_ids: ids,
            neighbor_weights: weights,
        },
    })
}

/// `name=value` session summary written next to exported rasters.
pub fn session_report(id: SessionId, snap: &Snapshot, result: &SessionResult) -> String {
    let mut s = format!("session={id}\nrevision={}\nk={}\n", snap.revision, snap.k);
    let _ = writeln!(s, "tag_filter={}", snap.tag_filter.as_deref().unwrap_or(""));
    for kind in ComponentKind::ALL {
        let i = kind.index();
        let ids: Vec<String> = result.synthesis.neighbor_ids[i].iter().map(u64::to_string).collect();
        let _ = writeln!(s, "{kind}.wb={}", facemanifold::report::fmt_float(snap.weights[i]));
        let _ = writeln!(s, "{kind}.neighbors={}", ids.join(","));
    }
    s
}
