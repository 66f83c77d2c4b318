//! Sketch corpora: generation and the on-disk directory layout
//! (`NNNN.pgm`, `layout.txt`, `tags.txt`).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::SketchRaster;
use crate::sketch::synthetic::synthesize_face;
use crate::sketch::{decompose, ComponentLayout, FaceSketchDecomposition, FaceStyle};

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSample {
    pub id: u64,
    pub tag: Option<String>,
    pub sketch: SketchRaster,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub layout: ComponentLayout,
    pub samples: Vec<CorpusSample>,
}

/// Seed of the `index`-th face of a corpus generated from `base`.
pub fn sample_seed(base: u64, index: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index)
}

impl Corpus {
    pub fn synthetic(n: usize, seed: u64, layout: &ComponentLayout, style: &FaceStyle) -> Self {
        let samples = (0..n as u64)
            .map(|i| {
                let face = synthesize_face(sample_seed(seed, i), layout, style);
                CorpusSample {
                    id: i,
                    tag: Some(face.tag),
                    sketch: face.raster,
                }
            })
            .collect();
        Self {
            layout: layout.clone(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn decompose_all(&self) -> Result<Vec<FaceSketchDecomposition>> {
        self.samples
            .iter()
            .map(|s| decompose(&s.sketch, &self.layout))
            .collect()
    }

    pub fn tags(&self) -> Vec<Option<String>> {
        self.samples.iter().map(|s| s.tag.clone()).collect()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.id).collect()
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.layout.write(dir.join("layout.txt"))?;
        let mut tags = String::new();
        for s in &self.samples {
            s.sketch.write_pgm(dir.join(format!("{:04}.pgm", s.id)))?;
            if let Some(t) = &s.tag {
                tags.push_str(&format!("{:04}={t}\n", s.id));
            }
        }
        fs::write(dir.join("tags.txt"), tags)?;
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let layout = ComponentLayout::read(dir.join("layout.txt"))?;
        let mut tags = std::collections::HashMap::new();
        let tag_path = dir.join("tags.txt");
        if tag_path.exists() {
            for line in fs::read_to_string(tag_path)?.lines().filter(|l| !l.trim().is_empty()) {
                let (id, tag) = line
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidInput(format!("malformed tag line: {line}")))?;
                let id: u64 = id
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad sample id in tags: {id}")))?;
                tags.insert(id, tag.trim().to_string());
            }
        }
        let mut ids: Vec<u64> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".pgm")?.parse().ok()
            })
            .collect();
        ids.sort_unstable();
        if ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let samples = ids
            .into_iter()
            .map(|id| {
                let sketch = SketchRaster::read_pgm(dir.join(format!("{id:04}.pgm")))?;
                if sketch.dims() != layout.canvas() {
                    return Err(Error::dims(
                        format!("{}x{}", layout.canvas_width(), layout.canvas_height()),
                        format!("{}x{} in sample {id}", sketch.width(), sketch.height()),
                    ));
                }
                Ok(CorpusSample {
                    id,
                    tag: tags.get(&id).cloned(),
                    sketch,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layout, samples })
    }
}
