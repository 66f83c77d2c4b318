mod common;

use std::sync::Arc;

use common::{fixture, manager, sample_strokes};
use facemanifold::applications::{reconstruct, synthesize};
use facemanifold::manifold::project;
use facemanifold::shadow::{compute_shadow, ShadowOptions};
use facemanifold::sketch::{decompose, ComponentKind};
use facemanifold::{SketchRaster, Stroke};
use facemanifold_service::{ServiceError, SessionConfig, SessionManager, SettingsUpdate};

fn line() -> Stroke {
    Stroke::new(vec![(10.0, 10.0), (50.0, 40.0)], 2.0)
}

#[test]
fn create_gives_fresh_ids_and_defaults() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let a = m.create(SessionConfig::default()).unwrap();
    let b = m.create(SessionConfig::default()).unwrap();
    assert_ne!(a, b);
    let s = m.snapshot(a).unwrap();
    assert_eq!(s.revision, 0);
    assert_eq!(s.weights, [0.0; 5]);
    assert_eq!(s.k, 10);
    assert!(s.auto_update);
    assert_eq!(s.canvas.ink_mass(), 0.0);
}

#[test]
fn no_store_means_no_sessions() {
    let m = SessionManager::new(None, None).unwrap();
    assert!(matches!(m.create(SessionConfig::default()), Err(ServiceError::NoStore)));
}

#[test]
fn initial_shadow_is_blank_canvas_shadow() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let id = m.create(SessionConfig::default()).unwrap();
    let r = m.current_result(id).unwrap();
    assert_eq!(r.revision, 0);
    let blank = SketchRaster::blank(64, 64);
    let expected = compute_shadow(&f.engine.store, &f.engine.embedders, &blank, &ShadowOptions::with_k(10)).unwrap();
    assert_eq!(r.shadow, expected);
    assert!(r.shadow.components.iter().all(|c| c.blank_query));
}

#[test]
fn strokes_change_ink_and_bump_revision() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let id = m.create(SessionConfig::default()).unwrap();
    let s1 = m.apply_stroke(id, &line()).unwrap();
    assert_eq!(s1.revision, 1);
    assert!(s1.canvas.ink_mass() > 0.0);
    let s2 = m
        .apply_stroke(id, &Stroke::eraser(vec![(10.0, 10.0), (50.0, 40.0)], 3.0))
        .unwrap();
    assert_eq!(s2.revision, 2);
    assert!(s2.canvas.ink_mass() < s1.canvas.ink_mass());

    let bad = Stroke::new(vec![(10.0, 10.0), (70.0, 40.0)], 2.0);
    assert!(m.apply_stroke(id, &bad).is_err());
    assert!(m.apply_stroke(id, &Stroke::new(vec![(1.0, 1.0)], 1.0)).is_err());
    assert_eq!(m.snapshot(id).unwrap().revision, 2);
}

#[test]
fn weights_validate_and_always_bump_revision() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let id = m.create(SessionConfig::default()).unwrap();
    let w = [0.1, 0.2, 0.3, 0.4, 0.5];
    assert_eq!(m.set_weights(id, w).unwrap().revision, 1);
    assert_eq!(m.set_weights(id, w).unwrap().revision, 2);
    assert!(m.set_weights(id, [0.0, 0.0, 1.5, 0.0, 0.0]).is_err());
    assert!(m.set_weights(id, [0.0, -0.1, 0.0, 0.0, 0.0]).is_err());
    assert!(m.set_weights(id, [f64::NAN, 0.0, 0.0, 0.0, 0.0]).is_err());
    assert_eq!(m.snapshot(id).unwrap().weights, w);
}

#[test]
fn slider_extremes() {
    let f = fixture(40, 8);
    let m = manager(&f);
    let id = m.create(SessionConfig::default()).unwrap();
    for s in sample_strokes(3).iter().take(6) {
        m.apply_stroke(id, s).unwrap();
    }
    m.apply_stroke(id, &line()).unwrap();
    let canvas = m.snapshot(id).unwrap().canvas;
    let decomposition = decompose(&canvas, f.engine.store.layout()).unwrap();

    m.set_weights(id, [1.0; 5]).unwrap();
    let raw = m.current_result(id).unwrap();
    let expected = reconstruct(&f.engine.embedders, &decomposition, f.engine.channels).unwrap();
    assert_eq!(raw.synthesis.reconstruction, expected);

    m.set_weights(id, [0.0; 5]).unwrap();
    let refined = m.current_result(id).unwrap();
    let projected: Vec<_> = ComponentKind::ALL
        .into_iter()
        .map(|k| {
            let q = f.engine.embedders.get(k).encode(decomposition.crop(k)).unwrap();
            project(&f.engine.store, k, &q, 10, None).unwrap().latent
        })
        .collect();
    let expected = synthesize(
        &f.engine.embedders,
        projected.try_into().unwrap(),
        f.engine.store.layout(),
        f.engine.channels,
    )
    .unwrap();
    assert_eq!(refined.synthesis.reconstruction, expected);
    assert_ne!(raw.synthesis.reconstruction.preview, refined.synthesis.reconstruction.preview);
}

#[test]
fn drawing_a_corpus_sample_reproduces_its_reconstruction() {
    let f = fixture(40, 8);
    let m = manager(&f);
    let id = m.create(SessionConfig::default()).unwrap();
    let j = 11;
    for s in &sample_strokes(j) {
        m.apply_stroke(id, s).unwrap();
    }
    let snap = m.snapshot(id).unwrap();
    assert_eq!(snap.canvas, f.corpus.samples[j as usize].sketch);
    let r = m.current_result(id).unwrap();
    assert_eq!(r.revision, snap.revision);
    let d = decompose(&f.corpus.samples[j as usize].sketch, f.engine.store.layout()).unwrap();
    let expected = reconstruct(&f.engine.embedders, &d, f.engine.channels).unwrap();
    let got = r.synthesis.reconstruction.canvas.channel(0);
    let err = got
        .iter()
        .zip(expected.canvas.channel(0))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-6, "max pre-clamp error {err}");
    for ids in &r.synthesis.neighbor_ids {
        assert_eq!(ids[0], j);
    }
}

#[test]
fn stale_results_are_dropped() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let id = m.create(SessionConfig::default()).unwrap();
    let old = m.apply_stroke(id, &line()).unwrap();
    let new = m.apply_stroke(id, &Stroke::new(vec![(5.0, 50.0), (60.0, 55.0)], 1.0)).unwrap();
    let mut rx = m.subscribe(id).unwrap();

    let stale = Arc::new(m.compute(&old).unwrap());
    assert!(!m.publish(id, stale).unwrap());
    assert!(rx.try_recv().is_err());

    let fresh = Arc::new(m.compute(&new).unwrap());
    assert!(m.publish(id, fresh.clone()).unwrap());
    assert_eq!(rx.try_recv().unwrap().revision, new.revision);
    // publishing the same revision twice is a no-op
    assert!(!m.publish(id, fresh).unwrap());
    assert_eq!(m.current_result(id).unwrap().revision, new.revision);
}

#[test]
fn auto_update_pushes_and_manual_mode_waits_for_convert() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let auto = m.create(SessionConfig::default()).unwrap();
    let mut rx = m.subscribe(auto).unwrap();
    let snap = m.apply_stroke(auto, &line()).unwrap();
    assert!(m.refresh_if_auto(auto, &snap).unwrap().is_some());
    assert_eq!(rx.try_recv().unwrap().revision, 1);

    let manual = m
        .create(SessionConfig {
            auto_update: Some(false),
            ..Default::default()
        })
        .unwrap();
    let mut rx = m.subscribe(manual).unwrap();
    let snap = m.apply_stroke(manual, &line()).unwrap();
    assert!(m.refresh_if_auto(manual, &snap).unwrap().is_none());
    assert!(rx.try_recv().is_err());
    assert_eq!(m.current_result(manual).unwrap().revision, 1);
    assert_eq!(rx.try_recv().unwrap().revision, 1);
}

#[test]
fn sessions_are_isolated() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let a = m.create(SessionConfig::default()).unwrap();
    let b = m.create(SessionConfig::default()).unwrap();
    let before = m.snapshot(b).unwrap();
    m.apply_stroke(a, &line()).unwrap();
    m.set_weights(a, [1.0; 5]).unwrap();
    m.update_settings(a, SettingsUpdate { k: Some(3), ..Default::default() }).unwrap();
    assert_eq!(m.snapshot(b).unwrap(), before);
    m.remove(a).unwrap();
    assert!(m.snapshot(a).is_err());
    assert_eq!(m.snapshot(b).unwrap(), before);
}

#[test]
fn concurrent_mutations_are_serialized() {
    let f = fixture(30, 6);
    let m = Arc::new(manager(&f));
    let id = m.create(SessionConfig::default()).unwrap();
    let handles: Vec<_> = (0..8)
        .map(|t| {
            let m = m.clone();
            std::thread::spawn(move || {
                let mut revs = Vec::new();
                for i in 0..10 {
                    let y = 5.0 + (t * 10 + i) as f64 * 0.5;
                    revs.push(m.apply_stroke(id, &Stroke::new(vec![(2.0, y), (60.0, y)], 1.0)).unwrap().revision);
                }
                revs
            })
        })
        .collect();
    let mut all: Vec<u64> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
    all.sort_unstable();
    assert_eq!(all, (1..=80).collect::<Vec<_>>());
}

#[test]
fn settings_validate() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let id = m.create(SessionConfig::default()).unwrap();
    assert!(m.update_settings(id, SettingsUpdate { k: Some(0), ..Default::default() }).is_err());
    assert!(m.update_settings(id, SettingsUpdate { k: Some(31), ..Default::default() }).is_err());
    assert!(m
        .update_settings(id, SettingsUpdate { tag_filter: Some(Some("nope".into())), ..Default::default() })
        .is_err());
    let s = m
        .update_settings(id, SettingsUpdate { k: Some(4), tag_filter: Some(Some("A".into())), ..Default::default() })
        .unwrap();
    assert_eq!((s.k, s.tag_filter.as_deref(), s.revision), (4, Some("A"), 1));
    let r = m.current_result(id).unwrap();
    for ids in &r.synthesis.neighbor_ids {
        assert!(ids.iter().all(|&i| f.corpus.samples[i as usize].tag.as_deref() == Some("A")));
    }
    assert!(m.create(SessionConfig { k: Some(0), ..Default::default() }).is_err());
}

#[test]
fn export_writes_files_under_root() {
    let f = fixture(30, 6);
    let m = manager(&f);
    let id = m.create(SessionConfig::default()).unwrap();
    m.apply_stroke(id, &line()).unwrap();
    let root = tempfile::tempdir().unwrap();
    let files = m.export(id, root.path(), "run1").unwrap();
    assert_eq!(files.len(), 4);
    let canvas = SketchRaster::read_pgm(root.path().join("run1/canvas.pgm")).unwrap();
    assert_eq!(canvas, m.snapshot(id).unwrap().canvas);
    let report = std::fs::read_to_string(root.path().join("run1/session.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| l.contains(".neighbors=")).count(), 5);
    assert!(report.contains("k=10\n"));

    let unknown = uuid::Uuid::new_v4();
    assert!(m.export(unknown, root.path(), "ghost").is_err());
    assert!(!root.path().join("ghost").exists());
    assert!(m.export(id, root.path(), "../escape").is_err());
    assert!(m.export(id, root.path(), "/abs").is_err());
}
