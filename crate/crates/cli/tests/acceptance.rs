//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use facemanifold::applications::{morph_sequence, reconstruct};
use facemanifold::corpus::{sample_seed, Corpus};
use facemanifold::embed::autoencoder::{
    train_autoencoder, AutoencoderConfig, ConvAutoencoder, Layer, Tensor,
};
use facemanifold::embed::{fit_pca, reconstruction_mse, EmbedderSet, LatentVector};
use facemanifold::fusion::{fuse, FeatureMap, DEPTH_ORDER};
use facemanifold::manifold::{
    blend, build_store, knn, project, solve_lle_weights, FeatureSet, ManifoldStore, SampleMeta, StoreConfig,
    DEFAULT_REGULARIZATION,
};
use facemanifold::sketch::synthetic::synthesize_face;
use facemanifold::sketch::{compose_preview, decompose, ComponentKind, ComponentLayout, FaceStyle, Window};
use facemanifold::SketchRaster;
use facemanifold_service::wire::{CreateSessionResponse, SynthesisResponse};
use facemanifold_service::{router, AppState, Engine, SessionManager};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Eliminates the last weight via the sum-to-one constraint, then solves the
/// normal equations of the unconstrained remainder.
fn lsq_oracle(query: &[f64], neighbors: &[&[f64]]) -> Option<Vec<f64>> {
    let k = neighbors.len();
    let last = neighbors[k - 1];
    let cols: Vec<Vec<f64>> = neighbors[..k - 1]
        .iter()
        .map(|n| n.iter().zip(last).map(|(a, b)| a - b).collect())
        .collect();
    let rhs: Vec<f64> = query.iter().zip(last).map(|(a, b)| a - b).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let ata = cols.iter().map(|ci| cols.iter().map(|cj| dot(ci, cj)).collect()).collect();
    let atb = cols.iter().map(|c| dot(c, &rhs)).collect();
    let mut w = gauss_solve(ata, atb)?;
    let rest: f64 = w.iter().sum();
    w.push(1.0 - rest);
    Some(w)
}

fn residual(query: &[f64], neighbors: &[&[f64]], w: &[f64]) -> f64 {
    (0..query.len())
        .map(|i| {
            let r = query[i] - neighbors.iter().zip(w).map(|(n, wk)| wk * n[i]).sum::<f64>();
            r * r
        })
        .sum()
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize, integer: bool) -> FeatureSet {
    let vectors = if integer {
        (0..n * d).map(|_| rng.random_range(-3i32..=3) as f64).collect()
    } else {
        gaussian(rng, n * d)
    };
    FeatureSet::new(ComponentKind::Nose, d, vectors, (0..n as u64).collect(), vec![None; n], None).unwrap()
}

fn lle_oracle() -> Outcome {
    let (d, n, k, trials) = (16, 200, 10, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst_sum, mut worst_rel) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let set = random_set(&mut rng, n, d, false);
        let q = gaussian(&mut rng, d);
        let nb = knn(&set, &q, k, None).map_err(|e| e.to_string())?;
        let rows: Vec<&[f64]> = nb.indices.iter().map(|&i| set.row(i)).collect();
        let w = solve_lle_weights(&q, &rows, DEFAULT_REGULARIZATION).map_err(|e| e.to_string())?;
        let o = lsq_oracle(&q, &rows).ok_or("oracle system singular")?;
        let (rs, ro) = (residual(&q, &rows, &w.weights), residual(&q, &rows, &o));
        worst_sum = worst_sum.max((w.sum() - 1.0).abs());
        worst_rel = worst_rel.max((rs - ro).abs() / ro.max(1e-12));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst_sum <= 1e-9 && worst_rel <= 1e-6 && secs < 5.0,
        format!("{trials} instances, max |sum-1| {worst_sum:.2e}, max residual rel diff {worst_rel:.2e}, {secs:.2} s"),
    )
}

fn closed_form() -> Outcome {
    let (a, b) = ([1.0, 1.0], [-1.0, 1.0]);
    let sym = solve_lle_weights(&[0.0, 1.0], &[&a, &b], DEFAULT_REGULARIZATION).map_err(|e| e.to_string())?;
    let (c, d) = ([1.0, 0.0], [2.0, 0.0]);
    let q = [0.0, 0.0];
    let col = solve_lle_weights(&q, &[&c, &d], DEFAULT_REGULARIZATION).map_err(|e| e.to_string())?;
    let p = col.combine(&[&c, &d]);
    let sym_err = (sym.weights[0] - 0.5).abs().max((sym.weights[1] - 0.5).abs());
    let col_err = (col.weights[0] - 2.0).abs().max((col.weights[1] + 1.0).abs());
    let proj_err = p.iter().zip(&q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    check(
        sym_err <= 1e-9 && col_err <= 1e-9 && proj_err <= 1e-9,
        format!("symmetric {:?}, collinear {:?}, projection error {proj_err:.1e}", sym.weights, col.weights),
    )
}

struct Fixture {
    corpus: Corpus,
    embedders: EmbedderSet,
    store: ManifoldStore,
}

const SEED: u64 = 21;

fn fixture(n: usize, d: usize) -> Fixture {
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
    Fixture { corpus, embedders, store }
}

fn idempotence(f: &Fixture) -> Outcome {
    let mut worst = 0.0f64;
    for s in f.corpus.samples.iter().take(100) {
        let dec = decompose(&s.sketch, &f.corpus.layout).map_err(|e| e.to_string())?;
        for kind in ComponentKind::ALL {
            let z = f.embedders.get(kind).encode(dec.crop(kind)).map_err(|e| e.to_string())?;
            let p = project(&f.store, kind, &z, 10, None).map_err(|e| e.to_string())?;
            for (a, b) in p.latent.values.iter().zip(&z.values) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-9, format!("100 samples x 5 components, max deviation {worst:.1e}"))
}

fn blending() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut tight = true;
    for _ in 0..100 {
        let q = LatentVector::new(ComponentKind::Mouth, gaussian(&mut rng, 16)).unwrap();
        let p = LatentVector::new(ComponentKind::Mouth, gaussian(&mut rng, 16)).unwrap();
        tight &= blend(&q, &p, 1.0).unwrap() == q && blend(&q, &p, 0.0).unwrap() == p;
        for wb in [0.25, 0.5, 0.75] {
            let b = blend(&q, &p, wb).unwrap();
            for i in 0..16 {
                worst = worst.max((b.values[i] - (wb * q.values[i] + (1.0 - wb) * p.values[i])).abs());
            }
        }
    }
    check(tight && worst <= 1e-12, format!("endpoints exact: {tight}, max affine deviation {worst:.1e}"))
}

fn dim_monotone() -> Outcome {
    let corpus = Corpus::synthetic(200, SEED, &ComponentLayout::default(), &FaceStyle::default());
    let decomps = corpus.decompose_all().map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in ComponentKind::ALL {
        let crops: Vec<_> = decomps.iter().map(|d| d.crop(kind)).collect();
        let e: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&d| reconstruction_mse(&fit_pca(&crops, d).unwrap(), &crops).unwrap())
            .collect();
        ok &= e[0] >= e[1] && e[1] >= e[2];
        lines.push(format!("{kind} {:.4}/{:.4}/{:.4}", e[0], e[1], e[2]));
    }
    check(ok, lines.join(", "))
}

fn knn_exact_and_fast() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for (integer, queries) in [(false, 500), (true, 500)] {
        let set = random_set(&mut rng, 2000, 16, integer);
        for _ in 0..queries {
            let q: Vec<f64> = if integer {
                (0..16).map(|_| rng.random_range(-3i32..=3) as f64).collect()
            } else {
                gaussian(&mut rng, 16)
            };
            let k = rng.random_range(1..=20);
            let got = knn(&set, &q, k, None).map_err(|e| e.to_string())?;
            let mut all: Vec<(f64, usize)> = (0..set.len())
                .map(|i| (set.row(i).iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if got.indices != all[..k].iter().map(|p| p.1).collect::<Vec<_>>() {
                mismatches += 1;
            }
        }
    }
    let big = random_set(&mut rng, 16860, 512, false);
    let queries: Vec<Vec<f64>> = (0..100).map(|_| gaussian(&mut rng, 512)).collect();
    let start = Instant::now();
    for q in &queries {
        std::hint::black_box(knn(&big, q, 10, None).map_err(|e| e.to_string())?);
    }
    let mean_ms = start.elapsed().as_secs_f64() * 1e3 / queries.len() as f64;
    check(
        mismatches == 0 && mean_ms < 50.0,
        format!("1000 queries, {mismatches} mismatches; 10-NN over 16860x512 mean {mean_ms:.2} ms"),
    )
}

fn overlapping_layout() -> ComponentLayout {
    ComponentLayout::new(
        40,
        40,
        [
            Window::new(5, 8, 20, 18),
            Window::new(15, 8, 32, 18),
            Window::new(12, 14, 26, 28),
            Window::new(8, 24, 30, 34),
        ],
    )
    .unwrap()
}

fn fusion_depth_order() -> Outcome {
    let layout = overlapping_layout();
    let maps: Vec<FeatureMap> = ComponentKind::ALL
        .iter()
        .rev()
        .map(|&k| {
            let (w, h) = layout.crop_dims(k);
            let data = (0..2 * w * h).map(|i| (k.index() * 1000 + i) as f64).collect();
            FeatureMap::new(k, 2, w, h, data).unwrap()
        })
        .collect();
    let fused = fuse(&maps, &layout).map_err(|e| e.to_string())?;
    let (cw, ch) = layout.canvas();
    let (mut bad, mut overlaps) = (0, 0);
    for y in 0..ch {
        for x in 0..cw {
            let covering: Vec<_> = DEPTH_ORDER.iter().filter(|k| layout.window(**k).contains(x, y)).collect();
            if covering.len() > 2 {
                overlaps += 1;
            }
            let winner = *covering[0];
            let win = layout.window(winner);
            let src = maps.iter().find(|m| m.component == winner).unwrap();
            let i = y * cw + x;
            let ok = fused.provenance[i] == winner
                && (0..2).all(|c| fused.channel(c)[i] == src.channel(c)[(y - win.y0) * src.width + (x - win.x0)]);
            if !ok {
                bad += 1;
            }
        }
    }
    check(
        bad == 0 && overlaps > 0,
        format!("{} pixels, {overlaps} facial overlaps, {bad} wrong", cw * ch),
    )
}

fn morph_endpoints(f: &Fixture) -> Outcome {
    let dec: Vec<_> = f.corpus.samples[..2]
        .iter()
        .map(|s| decompose(&s.sketch, &f.corpus.layout).unwrap())
        .collect();
    let frames = morph_sequence(&f.embedders, &dec[0], &dec[1], 3, 4).map_err(|e| e.to_string())?;
    let ra = reconstruct(&f.embedders, &dec[0], 4).map_err(|e| e.to_string())?;
    let rb = reconstruct(&f.embedders, &dec[1], 4).map_err(|e| e.to_string())?;
    let ends = frames[0] == ra && frames[2] == rb;
    let mid = (0..5).all(|c| {
        frames[1].latents[c]
            .values
            .iter()
            .zip(ra.latents[c].values.iter().zip(&rb.latents[c].values))
            .all(|(m, (a, b))| *m == (a + b) / 2.0)
    });
    check(ends && mid, format!("endpoints identical: {ends}, midpoint is exact average: {mid}"))
}

fn dyadic_sketch(w: usize, h: usize, seed: u64) -> SketchRaster {
    let ink = (0..w * h).map(|i| ((i as u64 * 7919 + seed) % 9) as f64 / 8.0).collect();
    SketchRaster::new(w, h, ink).unwrap()
}

fn decompose_compose() -> Outcome {
    let disjoint = ComponentLayout::new(
        32,
        32,
        [
            Window::new(4, 6, 14, 12),
            Window::new(18, 6, 28, 12),
            Window::new(12, 13, 20, 20),
            Window::new(9, 22, 23, 28),
        ],
    )
    .unwrap();
    let (cw, ch) = disjoint.canvas();
    let full = dyadic_sketch(cw, ch, 5);
    let ink = (0..cw * ch)
        .map(|i| if disjoint.in_facial_window(i % cw, i / cw) { full.ink()[i] } else { 0.0 })
        .collect();
    let s = SketchRaster::new(cw, ch, ink).unwrap();
    let d = decompose(&s, &disjoint).map_err(|e| e.to_string())?;
    let facial: f64 = ComponentKind::FACIAL.iter().map(|k| d.crop(*k).raster.ink_mass()).sum();
    let round_trip = compose_preview(&d) == s && facial == s.ink_mass();

    let mut conserved = true;
    for (l, seed) in [(disjoint.clone(), 1), (overlapping_layout(), 2), (ComponentLayout::default(), 3)] {
        let (cw, ch) = l.canvas();
        let s = dyadic_sketch(cw, ch, seed);
        let d = decompose(&s, &l).map_err(|e| e.to_string())?;
        let outside: f64 = (0..cw * ch)
            .filter(|i| !l.in_facial_window(i % cw, i / cw))
            .map(|i| s.ink()[i])
            .sum();
        let facial: f64 = (0..cw * ch)
            .filter(|i| l.in_facial_window(i % cw, i / cw))
            .map(|i| s.ink()[i])
            .sum();
        let rem = d.crop(ComponentKind::Remainder).raster.ink_mass();
        conserved &= rem == outside && rem + facial == s.ink_mass();
    }
    check(
        round_trip && conserved,
        format!("disjoint round trip exact: {round_trip}, remainder mass conserved: {conserved}"),
    )
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<serde_json::Value>) -> Result<Vec<u8>, String> {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.map_err(|e| e.to_string())?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes().to_vec();
    if !status.is_success() {
        return Err(format!("{uri}: {status} {}", String::from_utf8_lossy(&bytes)));
    }
    Ok(bytes)
}

fn service_end_to_end() -> Outcome {
    let f = fixture(40, 12);
    let channels = 4;
    let engine = Engine::new(f.store.clone(), f.embedders.clone(), channels).map_err(|e| e.to_string())?;
    let manager = SessionManager::new(Some(std::sync::Arc::new(engine)), None).map_err(|e| e.to_string())?;
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let app = router(AppState::new(manager, root.path().to_path_buf()));
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let samples = [0u64, 7, 23];
    let mut worst = 0.0f64;
    for &i in &samples {
        let face = synthesize_face(sample_seed(SEED, i), &f.corpus.layout, &FaceStyle::default());
        let sample = &f.corpus.samples[i as usize];
        let dec = decompose(&sample.sketch, &f.corpus.layout).map_err(|e| e.to_string())?;
        let expected = reconstruct(&f.embedders, &dec, channels).map_err(|e| e.to_string())?;
        let raw = rt.block_on(async {
            let created = call(&app, Method::POST, "/sessions", Some(serde_json::json!({"wb": [0.0, 0.0, 0.0, 0.0, 0.0]}))).await?;
            let id = serde_json::from_slice::<CreateSessionResponse>(&created).map_err(|e| e.to_string())?.id;
            for s in &face.strokes {
                let points: Vec<[f64; 2]> = s.points.iter().map(|&(x, y)| [x, y]).collect();
                let body = serde_json::json!({"points": points, "width": s.width, "erase": s.erase});
                call(&app, Method::POST, &format!("/sessions/{id}/strokes"), Some(body)).await?;
            }
            let syn = call(&app, Method::GET, &format!("/sessions/{id}/synthesis?raw=true"), None).await?;
            let syn: SynthesisResponse = serde_json::from_slice(&syn).map_err(|e| e.to_string())?;
            syn.raw.ok_or_else(|| "no raw channel in response".to_string())
        })?;
        let want = expected.canvas.channel(0);
        if raw.len() != want.len() {
            return Err(format!("raw length {} vs {}", raw.len(), want.len()));
        }
        for (a, b) in raw.iter().zip(want) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-6, format!("{} replayed samples, max pixel deviation {worst:.1e}", samples.len()))
}

fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    let data = (0..c * h * w)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..1.0);
            if rng.random_bool(0.5) { v } else { -v }
        })
        .collect();
    Tensor::from_vec(c, h, w, data)
}

/// Max relative error of analytic vs central-difference gradients of
/// `sum(g * layer(x))` with respect to inputs and parameters.
fn layer_gradient_error(layer: &Layer, x: &Tensor, rng: &mut ChaCha8Rng) -> f64 {
    let y = layer.forward(x);
    let g = random_tensor(rng, y.c, y.h, y.w);
    let loss = |l: &Layer, x: &Tensor| -> f64 { l.forward(x).data.iter().zip(&g.data).map(|(a, b)| a * b).sum() };
    let mut pgrad = vec![0.0; layer.params().len()];
    let dx = layer.backward(x, &g, &mut pgrad);
    let h = 1e-3;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
    let mut worst = 0.0f64;
    let input_probes: Vec<usize> = (0..x.data.len()).step_by((x.data.len() / 40).max(1)).collect();
    for i in input_probes {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp.data[i] += h;
        xm.data[i] -= h;
        worst = worst.max(rel(dx.data[i], (loss(layer, &xp) - loss(layer, &xm)) / (2.0 * h)));
    }
    let param_probes: Vec<usize> = (0..pgrad.len()).step_by((pgrad.len() / 40).max(1)).collect();
    for j in param_probes {
        let (mut lp, mut lm) = (layer.clone(), layer.clone());
        lp.params_mut()[j] += h;
        lm.params_mut()[j] -= h;
        worst = worst.max(rel(pgrad[j], (loss(&lp, x) - loss(&lm, x)) / (2.0 * h)));
    }
    worst
}

fn autoencoder() -> Outcome {
    let corpus = Corpus::synthetic(64, SEED, &ComponentLayout::default(), &FaceStyle::default());
    let decomps = corpus.decompose_all().map_err(|e| e.to_string())?;
    let kind = ComponentKind::Mouth;
    let crops: Vec<_> = decomps.iter().map(|d| d.crop(kind)).collect();
    let cfg = AutoencoderConfig {
        latent_dim: 8,
        epochs: 5,
        beta1: 0.5,
        beta2: 0.999,
        learning_rate: 2e-4,
        ..AutoencoderConfig::default()
    };

    let (w, h) = crops[0].dims();
    let net = ConvAutoencoder::new(kind, w, h, &cfg).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut x = random_tensor(&mut rng, 1, h.div_ceil(4) * 4, w.div_ceil(4) * 4);
    for layer in net.encoder.iter().chain(&net.decoder) {
        let mut layer = layer.clone();
        for p in layer.params_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        worst = worst.max(layer_gradient_error(&layer, &x, &mut rng));
        let y = layer.forward(&x);
        x = random_tensor(&mut rng, y.c, y.h, y.w);
    }

    let (_, history) = train_autoencoder(&crops, &cfg).map_err(|e| e.to_string())?;
    check(
        worst <= 1e-4 && history.final_loss < history.initial_loss,
        format!(
            "{} layers, max gradient rel error {worst:.1e}; loss {:.5} -> {:.5} after 5 epochs",
            net.encoder.len() + net.decoder.len(),
            history.initial_loss,
            history.final_loss
        ),
    )
}

fn main() -> ExitCode {
    let f = fixture(100, 16);
    let criteria: Vec<Criterion> = vec![
        ("lle-oracle-equivalence", Box::new(lle_oracle)),
        ("lle-closed-form-cases", Box::new(closed_form)),
        ("projection-idempotence", Box::new(|| idempotence(&f))),
        ("blend-endpoints-and-affinity", Box::new(blending)),
        ("latent-dimension-monotonicity", Box::new(dim_monotone)),
        ("knn-exactness-and-latency", Box::new(knn_exact_and_fast)),
        ("fusion-depth-order", Box::new(fusion_depth_order)),
        ("morph-endpoints", Box::new(|| morph_endpoints(&f))),
        ("decompose-compose-round-trip", Box::new(decompose_compose)),
        ("service-end-to-end", Box::new(service_end_to_end)),
        ("autoencoder-gradients-and-training", Box::new(autoencoder)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
