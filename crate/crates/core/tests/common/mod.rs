#![allow(dead_code)]

use facemanifold::corpus::Corpus;
use facemanifold::embed::EmbedderSet;
use facemanifold::manifold::{build_store, ManifoldStore, SampleMeta, StoreConfig};
use facemanifold::sketch::{ComponentLayout, FaceSketchDecomposition, FaceStyle};

pub struct Fixture {
    pub corpus: Corpus,
    pub decomps: Vec<FaceSketchDecomposition>,
    pub embedders: EmbedderSet,
    pub store: ManifoldStore,
}

pub fn fixture(n: usize, d: usize, seed: u64) -> Fixture {
    let layout = ComponentLayout::default();
    let corpus = Corpus::synthetic(n, seed, &layout, &FaceStyle::default());
    let decomps = corpus.decompose_all().unwrap();
    let embedders = EmbedderSet::fit_pca(&decomps, d).unwrap();
    let meta: Vec<SampleMeta> = corpus
        .samples
        .iter()
        .map(|s| SampleMeta {
            id: s.id,
            tag: s.tag.clone(),
        })
        .collect();
    let store = build_store(&embedders, &decomps, &meta, &StoreConfig::default()).unwrap();
    Fixture {
        corpus,
        decomps,
        embedders,
        store,
    }
}

/// Gaussian elimination with partial pivoting; `a` is row-major n×n.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
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

/// Sum-to-one least squares by eliminating the last weight and solving the
/// normal equations of the remaining unconstrained problem.
pub fn constrained_lsq_oracle(query: &[f64], neighbors: &[Vec<f64>]) -> Vec<f64> {
    let k = neighbors.len();
    let last = &neighbors[k - 1];
    if k == 1 {
        return vec![1.0];
    }
    let cols: Vec<Vec<f64>> = neighbors[..k - 1]
        .iter()
        .map(|n| n.iter().zip(last).map(|(a, b)| a - b).collect())
        .collect();
    let rhs: Vec<f64> = query.iter().zip(last).map(|(a, b)| a - b).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let ata: Vec<Vec<f64>> = cols
        .iter()
        .map(|ci| cols.iter().map(|cj| dot(ci, cj)).collect())
        .collect();
    let atb: Vec<f64> = cols.iter().map(|c| dot(c, &rhs)).collect();
    let mut w = gauss_solve(ata, atb).expect("oracle system is nonsingular");
    let rest: f64 = w.iter().sum();
    w.push(1.0 - rest);
    w
}

pub fn residual(query: &[f64], neighbors: &[Vec<f64>], w: &[f64]) -> f64 {
    (0..query.len())
        .map(|i| {
            let r = query[i] - neighbors.iter().zip(w).map(|(n, wk)| wk * n[i]).sum::<f64>();
            r * r
        })
        .sum()
}
