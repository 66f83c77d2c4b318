use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "facemanifold", version, about = "Face sketch component manifolds")]
struct Cli {
    /// Also write the report to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic face sketch corpus.
    CorpusGen(CorpusGen),
    /// Fit one embedder per component on a corpus.
    Fit(Fit),
    /// Encode a corpus into a manifold store.
    Build(Build),
    /// Refine a sketch by manifold projection and render the preview.
    Project(Project),
    /// Compute the shadow overlay for a sketch.
    Shadow(Shadow),
    /// Interpolate between two sketches in latent space.
    Morph(Morph),
    /// Assemble a face from components of several sketches.
    Recombine(Recombine),
    /// Time exact K-nearest-neighbour queries on random vectors.
    KnnBench(KnnBench),
    /// Projection quality for a range of K.
    KSweep(KSweep),
    /// Reconstruction error for a range of latent dimensions.
    DimSweep(DimSweep),
    /// Run the interactive session service.
    Serve(Serve),
}

#[derive(Args, Debug)]
pub struct CorpusGen {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "64x64", value_parser = parse_canvas)]
    pub canvas: (usize, usize),
    #[arg(long, default_value_t = 1.0)]
    pub stroke_width: f64,
    #[arg(long, default_value_t = 1.0)]
    pub variation: f64,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedderKind {
    Pca,
    Autoencoder,
}

#[derive(Args, Debug)]
pub struct Fit {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = EmbedderKind::Pca)]
    pub embedder: EmbedderKind,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct Build {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Omit the crop rasters (the store then cannot render shadows).
    #[arg(long)]
    pub no_exemplars: bool,
}

#[derive(Args, Debug)]
pub struct Engine {
    #[arg(long)]
    pub store: PathBuf,
    /// Model directory; defaults to `models` next to the store.
    #[arg(long)]
    pub models: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Project {
    #[command(flatten)]
    pub engine: Engine,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tag: Option<String>,
    /// One blend weight for all components, or five comma-separated.
    #[arg(long, default_value = "0", value_parser = parse_weights)]
    pub wb: [f64; 5],
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    /// Dump every fused channel and the provenance map here.
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Shadow {
    #[command(flatten)]
    pub engine: Engine,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tag: Option<String>,
    /// Equal weights instead of inverse distance.
    #[arg(long)]
    pub uniform: bool,
}

#[derive(Args, Debug)]
pub struct Morph {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Render a single frame with one t per component instead.
    #[arg(long, value_parser = parse_weights_any)]
    pub t: Option<[f64; 5]>,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
}

#[derive(Args, Debug)]
pub struct Recombine {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub left_eye: PathBuf,
    #[arg(long)]
    pub right_eye: PathBuf,
    #[arg(long)]
    pub nose: PathBuf,
    #[arg(long)]
    pub mouth: PathBuf,
    #[arg(long)]
    pub remainder: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
}

#[derive(Args, Debug)]
pub struct KnnBench {
    #[arg(long, default_value_t = 16860)]
    pub n: usize,
    #[arg(long, default_value_t = 512)]
    pub d: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check every result against a full sort.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Args, Debug)]
pub struct KSweep {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "3,6,10,15,20", value_delimiter = ',')]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    /// Fraction of the corpus held out as queries.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Latent noise, relative to the per-dimension spread of the store.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct DimSweep {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "4,8,16", value_delimiter = ',')]
    pub dims: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct Serve {
    #[command(flatten)]
    pub engine: Engine,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub k: Option<usize>,
    /// Expected canvas size; must match the store.
    #[arg(long, value_parser = parse_canvas)]
    pub canvas: Option<(usize, usize)>,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    #[arg(long, default_value = "exports")]
    pub export_root: PathBuf,
}

fn parse_canvas(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("canvas dimensions must be positive".into());
    }
    Ok((w, h))
}

fn parse_weights_any(s: &str) -> Result<[f64; 5], String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?}")))
        .collect::<Result<_, _>>()?;
    match vals.as_slice() {
        [v] => Ok([*v; 5]),
        [a, b, c, d, e] => Ok([*a, *b, *c, *d, *e]),
        _ => Err(format!("expected 1 or 5 values, got {}", vals.len())),
    }
}

fn parse_weights(s: &str) -> Result<[f64; 5], String> {
    let w = parse_weights_any(s)?;
    if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err("blend weights must lie in [0, 1]".into());
    }
    Ok(w)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CorpusGen(a) => commands::corpus_gen(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Build(a) => commands::build(&a),
        Command::Project(a) => commands::project_cmd(&a),
        Command::Shadow(a) => commands::shadow(&a),
        Command::Morph(a) => commands::morph(&a),
        Command::Recombine(a) => commands::recombine(&a),
        Command::KnnBench(a) => commands::knn_bench(&a),
        Command::KSweep(a) => commands::k_sweep(&a),
        Command::DimSweep(a) => commands::dim_sweep(&a),
        Command::Serve(a) => commands::serve(&a),
    };
    let report = match result {
        Ok(r) => r.render(),
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            return ExitCode::FAILURE;
        }
    };
    print!("{report}");
    if let Some(path) = cli.report {
        if let Err(e) = std::fs::write(&path, &report) {
            eprintln!("error: writing {}: {e}", path.display());
            return ExitCode::FAILURE;
        }
    }
    ExitCode::SUCCESS
}
