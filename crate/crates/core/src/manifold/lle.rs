//! Locally linear reconstruction weights: minimise `‖f − Σ w_k f_k‖²`
//! subject to `Σ w_k = 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::knn::squared_distance;
use crate::error::{Error, Result};

/// Default Tikhonov factor ε in `G + ε·tr(G)/K·I`.
pub const DEFAULT_REGULARIZATION: f64 = 1e-3;

/// Neighbours closer than this to the query trigger the one-hot shortcut.
pub const EXACT_MATCH_DISTANCE: f64 = 1e-12;

/// Condition number above which a linear system is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// How a weight vector was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// The query coincides with a neighbour.
    ExactMatch,
    /// `G w = 1` on a well-conditioned Gram matrix, then normalised.
    Gram,
    /// Singular Gram matrix with a unique constrained minimiser: the
    /// bordered system `[G 1; 1ᵀ 0] [w; μ] = [0; 1]`.
    Bordered,
    /// Non-unique minimiser: `(G + ε·tr(G)/K·I) w = 1`, then normalised.
    Regularized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub method: SolveMethod,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_k f_k`, accumulated in neighbour order.
    pub fn combine(&self, neighbors: &[&[f64]]) -> Vec<f64> {
        let d = neighbors.first().map_or(0, |n| n.len());
        let mut out = vec![0.0; d];
        for (w, nb) in self.weights.iter().zip(neighbors) {
            for (o, v) in out.iter_mut().zip(nb.iter()) {
                *o += w * v;
            }
        }
        out
    }

    /// Squared reconstruction residual `‖query − Σ w_k f_k‖²`.
    pub fn residual(&self, query: &[f64], neighbors: &[&[f64]]) -> f64 {
        squared_distance(query, &self.combine(neighbors))
    }
}

/// Solves for the sum-to-one reconstruction weights of `query` over
/// `neighbors`.
///
/// Uses the local Gram matrix `G_jk = (f − f_j)·(f − f_k)`. When `G` is
/// singular or its condition number exceeds [`MAX_CONDITION`], the
/// constrained problem is solved through its bordered (KKT) system, which is
/// exact whenever the minimiser is unique (e.g. collinear neighbours). If
/// that system is singular too, `G` is regularised by
/// `regularization · tr(G) / K`.
pub fn solve_lle_weights(query: &[f64], neighbors: &[&[f64]], regularization: f64) -> Result<WeightVector> {
    let k = neighbors.len();
    if k == 0 {
        return Err(Error::InvalidInput("need at least one neighbour".into()));
    }
    if !(regularization.is_finite() && regularization > 0.0) {
        return Err(Error::OutOfRange(format!("regularization {regularization} must be > 0")));
    }
    let d = query.len();
    if let Some(nb) = neighbors.iter().find(|n| n.len() != d) {
        return Err(Error::dims(format!("neighbours of dim {d}"), format!("dim {}", nb.len())));
    }
    if query.iter().chain(neighbors.iter().flat_map(|n| n.iter())).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weight solve input"));
    }

    if let Some(j) = neighbors
        .iter()
        .position(|n| squared_distance(query, n).sqrt() < EXACT_MATCH_DISTANCE)
    {
        let mut weights = vec![0.0; k];
        weights[j] = 1.0;
        return Ok(WeightVector {
            weights,
            method: SolveMethod::ExactMatch,
        });
    }
    if k == 1 {
        return Ok(WeightVector {
            weights: vec![1.0],
            method: SolveMethod::Gram,
        });
    }

    let diffs: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|n| query.iter().zip(n.iter()).map(|(a, b)| a - b).collect())
        .collect();
    let gram = DMatrix::from_fn(k, k, |a, b| {
        diffs[a].iter().zip(&diffs[b]).map(|(x, y)| x * y).sum::<f64>()
    });
    let ones = DVector::from_element(k, 1.0);

    if well_conditioned(&gram, true) {
        if let Some(w) = gram.clone().cholesky().map(|c| c.solve(&ones)) {
            return normalized(w.as_slice(), SolveMethod::Gram);
        }
    }

    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    kkt.view_mut((0, 0), (k, k)).copy_from(&gram);
    for i in 0..k {
        kkt[(i, k)] = 1.0;
        kkt[(k, i)] = 1.0;
    }
    if well_conditioned(&kkt, false) {
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        if let Some(sol) = kkt.lu().solve(&rhs) {
            return normalized(&sol.as_slice()[..k], SolveMethod::Bordered);
        }
    }

    let mut reg = gram;
    let shift = regularization * reg.trace() / k as f64;
    for i in 0..k {
        reg[(i, i)] += shift;
    }
    let w = reg
        .clone()
        .cholesky()
        .map(|c| c.solve(&ones))
        .or_else(|| reg.lu().solve(&ones))
        .ok_or_else(|| Error::InvalidInput("regularised Gram system is singular".into()))?;
    normalized(w.as_slice(), SolveMethod::Regularized)
}

/// Condition test on a symmetric matrix: every eigenvalue magnitude lies
/// within [`MAX_CONDITION`] of the largest, and with `definite` set all
/// eigenvalues are also strictly positive.
fn well_conditioned(m: &DMatrix<f64>, definite: bool) -> bool {
    let eig = SymmetricEigen::new(m.clone());
    if definite && eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return false;
    }
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    lo > 0.0 && hi / lo <= MAX_CONDITION
}

fn normalized(w: &[f64], method: SolveMethod) -> Result<WeightVector> {
    let s: f64 = w.iter().sum();
    if !(s.is_finite() && s != 0.0) {
        return Err(Error::NonFinite("weight normalisation"));
    }
    Ok(WeightVector {
        weights: w.iter().map(|v| v / s).collect(),
        method,
    })
}
