use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use sha2::{Digest, Sha256};

use super::{check_crop, check_latent, ComponentEmbedder, LatentVector};
use crate::error::{Error, Result};
use crate::sketch::{ComponentCrop, ComponentKind};

const MAGIC: &[u8; 4] = b"FMEM";
const VERSION: u32 = 1;

/// Linear embedder: `encode(x) = Bᵀ(x - mean)`, `decode(z) = mean + B z`,
/// with `B` holding `d` orthonormal principal directions of the training
/// crops.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    component: ComponentKind,
    width: usize,
    height: usize,
    mean: Vec<f64>,
    /// `d` rows of `width * height` entries each.
    basis: Vec<f64>,
    d: usize,
}

impl PcaModel {
    pub fn component(&self) -> ComponentKind {
        self.component
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn basis_vector(&self, i: usize) -> &[f64] {
        let p = self.pixels();
        &self.basis[i * p..(i + 1) * p]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21 + 8 * (self.mean.len() + self.basis.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.component.index() as u8);
        for v in [self.width, self.height, self.d] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in self.mean.iter().chain(&self.basis) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 21 || &bytes[..4] != MAGIC {
            return Err(Error::Corrupt("not an FMEM model file".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let component = ComponentKind::from_index(bytes[8] as usize)
            .ok_or_else(|| Error::Corrupt(format!("bad component tag {}", bytes[8])))?;
        let (width, height, d) = (u32_at(9) as usize, u32_at(13) as usize, u32_at(17) as usize);
        let p = width
            .checked_mul(height)
            .ok_or_else(|| Error::Corrupt("crop size overflow".into()))?;
        let expected = p
            .checked_mul(d + 1)
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(21))
            .ok_or_else(|| Error::Corrupt("model size overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::Corrupt(format!(
                "model file is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let floats: Vec<f64> = bytes[21..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (mean, basis) = floats.split_at(p);
        Ok(Self {
            component,
            width,
            height,
            mean: mean.to_vec(),
            basis: basis.to_vec(),
            d,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    fn encode_values(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        (0..self.d)
            .map(|i| dot(self.basis_vector(i), &centered))
            .collect()
    }

    fn decode_values(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (i, &zi) in z.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.basis_vector(i)) {
                *o += zi * b;
            }
        }
        out
    }
}

impl ComponentEmbedder for PcaModel {
    fn component(&self) -> ComponentKind {
        self.component
    }

    fn crop_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn latent_dim(&self) -> usize {
        self.d
    }

    fn encode(&self, crop: &ComponentCrop) -> Result<LatentVector> {
        check_crop(self, crop)?;
        LatentVector::new(self.component, self.encode_values(crop.raster.ink()))
    }

    fn decode_raw(&self, latent: &LatentVector) -> Result<Vec<f64>> {
        check_latent(self, latent)?;
        Ok(self.decode_values(&latent.values))
    }

    fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

/// Fits a `d`-dimensional PCA model on crops of one component.
///
/// Principal directions come from the eigendecomposition of the `N x N`
/// Gram matrix of the centered corpus, lifted to pixel space and
/// re-orthonormalised. Eigenvalue ties keep the lower index. Directions
/// beyond the numerical rank of the corpus are completed with canonical
/// unit vectors in pixel order. Each direction is flipped so its
/// largest-magnitude entry (first on ties) is non-negative.
pub fn fit_pca(corpus: &[&ComponentCrop], d: usize) -> Result<PcaModel> {
    let first = corpus.first().ok_or(Error::EmptyCorpus)?;
    let (kind, (width, height)) = (first.kind, first.dims());
    let p = width * height;
    let n = corpus.len();
    if d == 0 || d > n.min(p) {
        return Err(Error::OutOfRange(format!(
            "latent dimension {d} not in 1..={}",
            n.min(p)
        )));
    }
    for c in corpus {
        if c.kind != kind || c.dims() != (width, height) {
            return Err(Error::dims(
                format!("{kind} crops of {width}x{height}"),
                format!("{} crop of {}x{}", c.kind, c.raster.width(), c.raster.height()),
            ));
        }
    }

    let mut mean = vec![0.0; p];
    for c in corpus {
        for (m, v) in mean.iter_mut().zip(c.raster.ink()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, p, |i, j| corpus[i].raster.ink()[j] - mean[j]);
    let gram = &centered * centered.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let floor = lambda_max * 1e-12;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    for &k in order.iter().take(d) {
        let lambda = eig.eigenvalues[k];
        if lambda <= floor || lambda <= 0.0 {
            break;
        }
        let u = eig.eigenvectors.column(k);
        let mut v = vec![0.0; p];
        for (i, &ui) in u.iter().enumerate() {
            for (vj, &x) in v.iter_mut().zip(centered.row(i).iter()) {
                *vj += ui * x;
            }
        }
        if !orthonormalize(&mut v, &basis, 1e-6) {
            break;
        }
        basis.push(v);
    }
    let mut e = 0;
    while basis.len() < d && e < p {
        let mut v = vec![0.0; p];
        v[e] = 1.0;
        if orthonormalize(&mut v, &basis, 1e-3) {
            basis.push(v);
        }
        e += 1;
    }
    for v in &mut basis {
        let mut pivot = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = j;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(PcaModel {
        component: kind,
        width,
        height,
        mean,
        basis: basis.concat(),
        d,
    })
}

/// Two passes of modified Gram-Schmidt against `against`, then normalise.
/// Returns false if less than `keep` of the original norm survives.
fn orthonormalize(v: &mut [f64], against: &[Vec<f64>], keep: f64) -> bool {
    let norm0 = dot(v, v).sqrt();
    if norm0 == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for b in against {
            let c = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let norm = dot(v, v).sqrt();
    if norm <= keep * norm0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean over the corpus of the per-pixel squared error of
/// `decode(encode(x))`, before clamping.
pub fn reconstruction_mse(model: &dyn ComponentEmbedder, corpus: &[&ComponentCrop]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total = 0.0;
    for crop in corpus {
        let z = model.encode(crop)?;
        let x = model.decode_raw(&z)?;
        let se: f64 = x
            .iter()
            .zip(crop.raster.ink())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += se / x.len() as f64;
    }
    Ok(total / corpus.len() as f64)
}
