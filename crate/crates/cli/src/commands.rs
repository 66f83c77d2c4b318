use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use facemanifold::applications::{morph_frame, morph_sequence, recombine_components, write_frames};
use facemanifold::corpus::Corpus;
use facemanifold::embed::autoencoder::{train_autoencoder, AutoencoderConfig};
use facemanifold::embed::{fit_pca, reconstruction_mse, EmbedderSet, LatentVector};
use facemanifold::fusion::{fuse_latents, render_preview};
use facemanifold::manifold::{blend, build_store, knn, project, FeatureSet, ManifoldStore, SampleMeta, StoreConfig};
use facemanifold::report::Report;
use facemanifold::shadow::{compute_shadow, BlendMode, ShadowOptions};
use facemanifold::sketch::{decompose, ComponentKind, ComponentLayout, FaceSketchDecomposition, FaceStyle};
use facemanifold::SketchRaster;
use facemanifold_service::{serve as serve_http, Engine as ServiceEngine, ServerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Build, CorpusGen, DimSweep, EmbedderKind, Engine, Fit, KSweep, KnnBench, Morph, Project, Recombine, Serve, Shadow};

const LAYOUT_FILE: &str = "layout.txt";

fn load_corpus(dir: &Path) -> Result<Corpus> {
    Corpus::read_dir(dir).with_context(|| format!("reading corpus {}", dir.display()))
}

fn load_models(dir: &Path) -> Result<(EmbedderSet, ComponentLayout)> {
    let embedders = EmbedderSet::load_dir(dir).with_context(|| format!("loading models from {}", dir.display()))?;
    let layout = ComponentLayout::read(dir.join(LAYOUT_FILE))
        .with_context(|| format!("reading {}", dir.join(LAYOUT_FILE).display()))?;
    embedders.check_layout(&layout)?;
    Ok((embedders, layout))
}

fn load_engine(e: &Engine) -> Result<(ManifoldStore, EmbedderSet)> {
    let store = ManifoldStore::load(&e.store).with_context(|| format!("loading store {}", e.store.display()))?;
    let models = match &e.models {
        Some(m) => m.clone(),
        None => e.store.parent().unwrap_or(Path::new(".")).join("models"),
    };
    let embedders = EmbedderSet::load_dir(&models).with_context(|| format!("loading models from {}", models.display()))?;
    store.check_embedders(&embedders)?;
    embedders.check_layout(store.layout())?;
    Ok((store, embedders))
}

fn read_sketch(path: &Path, layout: &ComponentLayout) -> Result<FaceSketchDecomposition> {
    let raster = SketchRaster::read_pgm(path).with_context(|| format!("reading {}", path.display()))?;
    decompose(&raster, layout).with_context(|| format!("decomposing {}", path.display()))
}

fn write_pgm(raster: &SketchRaster, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    raster.write_pgm(path).with_context(|| format!("writing {}", path.display()))
}

fn crops(decomps: &[FaceSketchDecomposition], kind: ComponentKind) -> Vec<&facemanifold::sketch::ComponentCrop> {
    decomps.iter().map(|d| d.crop(kind)).collect()
}

fn metas(corpus: &Corpus) -> Vec<SampleMeta> {
    corpus
        .samples
        .iter()
        .map(|s| SampleMeta { id: s.id, tag: s.tag.clone() })
        .collect()
}

pub fn corpus_gen(a: &CorpusGen) -> Result<Report> {
    ensure!(a.n > 0, "--n must be at least 1");
    ensure!(a.stroke_width > 0.0, "--stroke-width must be positive");
    ensure!(a.variation >= 0.0, "--variation must be non-negative");
    let layout = ComponentLayout::default_for(a.canvas.0, a.canvas.1)?;
    let style = FaceStyle {
        stroke_width: a.stroke_width,
        variation: a.variation,
        ..FaceStyle::default()
    };
    let corpus = Corpus::synthetic(a.n, a.seed, &layout, &style);
    corpus.write_dir(&a.out)?;
    let mut r = Report::new();
    r.text("samples", a.n)
        .text("seed", a.seed)
        .text("canvas", format!("{}x{}", a.canvas.0, a.canvas.1))
        .text("out", a.out.display());
    Ok(r)
}

pub fn fit(a: &Fit) -> Result<Report> {
    ensure!(a.d > 0, "--d must be at least 1");
    let corpus = load_corpus(&a.corpus)?;
    let decomps = corpus.decompose_all()?;
    fs::create_dir_all(&a.out)?;
    corpus.layout.write(a.out.join(LAYOUT_FILE))?;
    let mut r = Report::new();
    r.text("embedder", format!("{:?}", a.embedder).to_lowercase())
        .text("samples", corpus.len())
        .text("d", a.d);
    match a.embedder {
        EmbedderKind::Pca => {
            for kind in ComponentKind::ALL {
                let cs = crops(&decomps, kind);
                let model = fit_pca(&cs, a.d)?;
                r.float(format!("{kind}.mse"), reconstruction_mse(&model, &cs)?);
                model.save(a.out.join(format!("{kind}.fmem")))?;
                let _ = fs::remove_file(a.out.join(format!("{kind}.fmae")));
            }
        }
        EmbedderKind::Autoencoder => {
            let cfg = AutoencoderConfig {
                latent_dim: a.d,
                epochs: a.epochs,
                batch_size: a.batch,
                learning_rate: a.lr,
                seed: a.seed,
                ..AutoencoderConfig::default()
            };
            for kind in ComponentKind::ALL {
                let cs = crops(&decomps, kind);
                let (net, history) = train_autoencoder(&cs, &cfg)?;
                r.float(format!("{kind}.initial_loss"), history.initial_loss)
                    .float(format!("{kind}.final_loss"), history.final_loss);
                net.save(a.out.join(format!("{kind}.fmae")))?;
                let _ = fs::remove_file(a.out.join(format!("{kind}.fmem")));
            }
        }
    }
    Ok(r)
}

pub fn build(a: &Build) -> Result<Report> {
    let corpus = load_corpus(&a.corpus)?;
    let (embedders, layout) = load_models(&a.models)?;
    ensure!(
        layout == corpus.layout,
        "corpus layout does not match the layout the models were fitted on"
    );
    let decomps = corpus.decompose_all()?;
    let config = StoreConfig {
        default_k: a.k,
        keep_exemplars: !a.no_exemplars,
    };
    let store = build_store(&embedders, &decomps, &metas(&corpus), &config)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    store.save(&a.out)?;
    let mut r = Report::new();
    r.text("samples", store.len())
        .text("default_k", store.default_k())
        .text("exemplars", !a.no_exemplars)
        .text("out", a.out.display());
    for kind in ComponentKind::ALL {
        r.text(format!("{kind}.dim"), store.set(kind).dim());
    }
    Ok(r)
}

pub fn project_cmd(a: &Project) -> Result<Report> {
    let (store, embedders) = load_engine(&a.engine)?;
    let k = a.k.unwrap_or(store.default_k());
    let tag = a.tag.as_deref();
    match tag {
        Some(t) => store.check_tag(t, k)?,
        None => store.check_k(k)?,
    }
    let decomp = read_sketch(&a.input, store.layout())?;
    let mut r = Report::new();
    r.text("k", k).text("tag_filter", tag.unwrap_or(""));
    let mut latents = Vec::with_capacity(5);
    for kind in ComponentKind::ALL {
        let q = embedders.get(kind).encode(decomp.crop(kind))?;
        let p = project(&store, kind, &q, k, tag)?;
        let set = store.set(kind);
        let ids: Vec<String> = p.neighbors.indices.iter().map(|&i| set.sample_id(i).to_string()).collect();
        r.float(format!("{kind}.wb"), a.wb[kind.index()])
            .text(format!("{kind}.neighbors"), ids.join(","))
            .float(format!("{kind}.weight_sum"), p.weights.sum());
        latents.push(blend(&q, &p.latent, a.wb[kind.index()])?);
    }
    let latents: [LatentVector; 5] = latents.try_into().expect("five latents");
    let canvas = fuse_latents(&embedders, &latents, store.layout(), a.channels)?;
    let preview = render_preview(&canvas);
    write_pgm(&preview, &a.out)?;
    if let Some(dir) = &a.debug_dir {
        canvas.write_debug_dir(dir)?;
        r.text("debug_dir", dir.display());
    }
    r.text("out", a.out.display());
    Ok(r)
}

pub fn shadow(a: &Shadow) -> Result<Report> {
    let (store, embedders) = load_engine(&a.engine)?;
    let k = a.k.unwrap_or(store.default_k());
    let raster = SketchRaster::read_pgm(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let options = ShadowOptions {
        k,
        tag_filter: a.tag.as_deref(),
        mode: if a.uniform { BlendMode::Uniform } else { BlendMode::InverseDistance },
    };
    let overlay = compute_shadow(&store, &embedders, &raster, &options)?;
    overlay.write_dir(&a.out)?;
    let mut r = Report::new();
    r.text("out", a.out.display());
    for kind in ComponentKind::ALL {
        let c = overlay.component(kind);
        let ids: Vec<String> = c.neighbor_ids.iter().map(u64::to_string).collect();
        r.text(format!("{kind}.neighbors"), ids.join(","))
            .float(format!("{kind}.entropy"), c.entropy())
            .text(format!("{kind}.blank"), c.blank_query);
    }
    Ok(r)
}

pub fn morph(a: &Morph) -> Result<Report> {
    let (embedders, layout) = load_models(&a.models)?;
    let (da, db) = (read_sketch(&a.a, &layout)?, read_sketch(&a.b, &layout)?);
    let mut r = Report::new();
    match a.t {
        Some(t) => {
            let frame = morph_frame(&embedders, &da, &db, t, a.channels)?;
            write_pgm(&frame.preview, &a.out)?;
            for kind in ComponentKind::ALL {
                r.float(format!("{kind}.t"), t[kind.index()]);
            }
        }
        None => {
            let frames = morph_sequence(&embedders, &da, &db, a.steps, a.channels)?;
            write_frames(&frames, &a.out)?;
            r.text("frames", frames.len());
        }
    }
    r.text("out", a.out.display());
    Ok(r)
}

pub fn recombine(a: &Recombine) -> Result<Report> {
    let (embedders, layout) = load_models(&a.models)?;
    let sources = [&a.left_eye, &a.right_eye, &a.nose, &a.mouth, &a.remainder];
    let decomps = sources
        .iter()
        .map(|p| read_sketch(p, &layout))
        .collect::<Result<Vec<_>>>()?;
    let assignments: Vec<(ComponentKind, &FaceSketchDecomposition)> =
        ComponentKind::ALL.into_iter().zip(decomps.iter()).collect();
    let face = recombine_components(&embedders, &assignments, a.channels)?;
    write_pgm(&face.preview, &a.out)?;
    let mut r = Report::new();
    for (kind, p) in ComponentKind::ALL.into_iter().zip(sources) {
        r.text(format!("{kind}.source"), p.display());
    }
    r.text("out", a.out.display());
    Ok(r)
}

fn gaussian_set(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<FeatureSet> {
    let vectors: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Ok(FeatureSet::new(
        ComponentKind::Nose,
        d,
        vectors,
        (0..n as u64).collect(),
        vec![None; n],
        None,
    )?)
}

pub fn knn_bench(a: &KnnBench) -> Result<Report> {
    ensure!(a.n > 0 && a.d > 0 && a.queries > 0, "--n, --d and --queries must be positive");
    ensure!((1..=a.n).contains(&a.k), "--k must lie in 1..={}", a.n);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let set = gaussian_set(a.n, a.d, &mut rng)?;
    let queries: Vec<Vec<f64>> = (0..a.queries)
        .map(|_| (0..a.d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    let mut mismatches = 0usize;
    for q in &queries {
        let t = Instant::now();
        let got = knn(&set, q, a.k, None)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        total += ms;
        worst = worst.max(ms);
        if a.verify {
            let mut all: Vec<(f64, usize)> = (0..a.n)
                .map(|i| {
                    let d2: f64 = set.row(i).iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum();
                    (d2, i)
                })
                .collect();
            all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let want: Vec<usize> = all[..a.k].iter().map(|p| p.1).collect();
            if want != got.indices {
                mismatches += 1;
            }
        }
    }
    let mut r = Report::new();
    r.text("n", a.n)
        .text("d", a.d)
        .text("k", a.k)
        .text("queries", a.queries)
        .float("mean_ms", total / a.queries as f64)
        .float("max_ms", worst);
    if a.verify {
        r.text("mismatches", mismatches);
        if mismatches > 0 {
            bail!("{mismatches} of {} queries disagree with the exhaustive search", a.queries);
        }
    }
    Ok(r)
}

pub fn k_sweep(a: &KSweep) -> Result<Report> {
    ensure!(!a.ks.is_empty(), "--ks must list at least one value");
    ensure!(a.holdout > 0.0 && a.holdout < 1.0, "--holdout must lie in (0, 1)");
    ensure!(a.noise >= 0.0, "--noise must be non-negative");
    let corpus = load_corpus(&a.corpus)?;
    let n_query = ((corpus.len() as f64 * a.holdout).round() as usize).max(1);
    ensure!(n_query < corpus.len(), "corpus too small to hold out {n_query} queries");
    let decomps = corpus.decompose_all()?;
    let (train, held) = decomps.split_at(corpus.len() - n_query);
    let meta = metas(&corpus);
    let embedders = EmbedderSet::fit_pca(train, a.d)?;
    let config = StoreConfig {
        default_k: 1,
        keep_exemplars: false,
    };
    let store = build_store(&embedders, train, &meta[..train.len()], &config)?;
    let max_k = *a.ks.iter().max().expect("non-empty");
    ensure!(
        a.ks.iter().all(|&k| k >= 1) && max_k <= store.len(),
        "every K must lie in 1..={}",
        store.len()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut noisy_err = 0.0;
    let mut err = vec![0.0; a.ks.len()];
    for d in held {
        for kind in ComponentKind::ALL {
            let clean = embedders.get(kind).encode(d.crop(kind))?;
            let set = store.set(kind);
            let spread = column_std(set);
            let values: Vec<f64> = clean
                .values
                .iter()
                .zip(&spread)
                .map(|(v, s)| v + a.noise * s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let noisy = LatentVector::new(kind, values)?;
            noisy_err += sq_err(&noisy.values, &clean.values);
            for (j, &k) in a.ks.iter().enumerate() {
                let p = project(&store, kind, &noisy, k, None)?;
                err[j] += sq_err(&p.latent.values, &clean.values);
            }
        }
    }
    let count = (held.len() * 5) as f64;
    let mut r = Report::new();
    r.text("train", store.len())
        .text("queries", held.len())
        .text("d", a.d)
        .float("noise", a.noise)
        .float("noisy_mse", noisy_err / count);
    let mut best = (f64::INFINITY, 0);
    for (j, &k) in a.ks.iter().enumerate() {
        let e = err[j] / count;
        if e < best.0 {
            best = (e, k);
        }
        r.float(format!("k{k}.mse"), e);
    }
    r.text("best_k", best.1);
    Ok(r)
}

fn column_std(set: &FeatureSet) -> Vec<f64> {
    let (n, d) = (set.len(), set.dim());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(set.row(i)) {
            *m += v / n as f64;
        }
    }
    let mut var = vec![0.0; d];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(set.row(i)).zip(&mean) {
            *s += (v - m) * (v - m) / n as f64;
        }
    }
    var.into_iter().map(f64::sqrt).collect()
}

fn sq_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn dim_sweep(a: &DimSweep) -> Result<Report> {
    ensure!(!a.dims.is_empty(), "--dims must list at least one value");
    let mut dims = a.dims.clone();
    dims.sort_unstable();
    dims.dedup();
    ensure!(dims[0] >= 1, "latent dimensions must be at least 1");
    let corpus = load_corpus(&a.corpus)?;
    let decomps = corpus.decompose_all()?;
    let mut r = Report::new();
    r.text("samples", corpus.len());
    let mut monotone = true;
    for kind in ComponentKind::ALL {
        let cs = crops(&decomps, kind);
        let mut prev = f64::INFINITY;
        for &d in &dims {
            let mse = reconstruction_mse(&fit_pca(&cs, d)?, &cs)?;
            monotone &= mse <= prev;
            prev = mse;
            r.float(format!("{kind}.d{d}.mse"), mse);
        }
    }
    r.text("monotone", monotone);
    Ok(r)
}

pub fn serve(a: &Serve) -> Result<Report> {
    let (store, embedders) = load_engine(&a.engine)?;
    if let Some((w, h)) = a.canvas {
        let (sw, sh) = store.layout().canvas();
        ensure!((w, h) == (sw, sh), "store canvas is {sw}x{sh}, not {w}x{h}");
    }
    if let Some(k) = a.k {
        store.check_k(k)?;
    }
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", a.host, a.port))?;
    let engine = ServiceEngine::new(store, embedders, a.channels).map_err(|e| anyhow::anyhow!("{e}"))?;
    let config = ServerConfig {
        addr,
        export_root: PathBuf::from(&a.export_root),
        default_k: a.k,
    };
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    tokio::runtime::Runtime::new()?.block_on(serve_http(engine, config))?;
    Ok(Report::new())
}
