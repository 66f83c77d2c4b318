use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::FeatureSet;
use crate::error::{Error, Result};

/// The `k` nearest rows of a feature set, closest first.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSet {
    /// Row indices into the feature set.
    pub indices: Vec<usize>,
    /// Euclidean distances, ascending.
    pub distances: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    d2: f64,
    idx: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.idx.cmp(&other.idx))
    }
}

/// Squared Euclidean distance with four independent accumulators.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            let d = x[i] - y[i];
            acc[i] += d * d;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Exact brute-force k-nearest-neighbour search.
///
/// Rows whose tag differs from `tag_filter` are skipped. Ties in distance
/// go to the lower row index. A query that equals a stored row finds it at
/// distance zero.
pub fn knn(set: &FeatureSet, query: &[f64], k: usize, tag_filter: Option<&str>) -> Result<NeighborSet> {
    if query.len() != set.dim() {
        return Err(Error::dims(
            format!("query of dim {}", set.dim()),
            format!("dim {}", query.len()),
        ));
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("knn query"));
    }
    let available = set.filtered_len(tag_filter);
    if available == 0 {
        return Err(Error::InvalidInput(format!(
            "no {} samples match tag filter {:?}",
            set.component(),
            tag_filter
        )));
    }
    if k == 0 || k > available {
        return Err(Error::OutOfRange(format!("K={k} not in 1..={available}")));
    }

    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for idx in 0..set.len() {
        if !set.matches(idx, tag_filter) {
            continue;
        }
        let c = Candidate {
            d2: squared_distance(set.row(idx), query),
            idx,
        };
        if heap.len() < k {
            heap.push(c);
        } else if c < *heap.peek().expect("heap holds k items") {
            heap.pop();
            heap.push(c);
        }
    }
    let sorted = heap.into_sorted_vec();
    Ok(NeighborSet {
        indices: sorted.iter().map(|c| c.idx).collect(),
        distances: sorted.iter().map(|c| c.d2.sqrt()).collect(),
    })
}
