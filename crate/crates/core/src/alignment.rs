//! Weighted cross-alignment between a crop set and a description set.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::geometry::Region;

/// Tolerance for the "weights sum to one" invariant.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// `exp(x_i / T) / sum_j exp(x_j / T)`, evaluated with the maximum
/// subtracted first.
pub fn softmax_weights(similarities: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if similarities.is_empty() {
        return Err(Error::EmptyInput("softmax over no similarities"));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidParams(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if similarities.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParams("non-finite similarity".into()));
    }
    let max = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = similarities
        .iter()
        .map(|s| ((s - max) / temperature).exp())
        .collect();
    let total = compensated_sum(exps.iter().copied());
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Cosine of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    Ok(u.dot(v)?.clamp(-1.0, 1.0))
}

/// Neumaier-compensated sum; the result does not depend on cancellation
/// between large and small terms.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_weights(weights: &[f64], what: &str) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParams(format!("{what} weights must be positive")));
    }
    let total = compensated_sum(weights.iter().copied());
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::InvalidParams(format!(
            "{what} weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

fn softmax_against(
    embeddings: &[EmbeddingVector],
    reference: &EmbeddingVector,
    temperature: f64,
) -> Result<Vec<f64>> {
    let sims = embeddings
        .iter()
        .map(|e| cosine(e, reference))
        .collect::<Result<Vec<_>>>()?;
    softmax_weights(&sims, temperature)
}

/// Crops of one image, their embeddings, and normalized weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedCropSet {
    regions: Vec<Region>,
    embeddings: Vec<EmbeddingVector>,
    weights: Vec<f64>,
}

impl WeightedCropSet {
    pub fn new(regions: Vec<Region>, embeddings: Vec<EmbeddingVector>, weights: Vec<f64>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::EmptyInput("crop set"));
        }
        if regions.len() != embeddings.len() || regions.len() != weights.len() {
            return Err(Error::InvalidParams(format!(
                "crop set lengths differ: {} regions, {} embeddings, {} weights",
                regions.len(),
                embeddings.len(),
                weights.len()
            )));
        }
        check_weights(&weights, "crop")?;
        Ok(Self {
            regions,
            embeddings,
            weights,
        })
    }

    /// Weights each crop by softmax of its cosine to `reference` (the whole
    /// image's embedding).
    pub fn weighted_against(
        regions: Vec<Region>,
        embeddings: Vec<EmbeddingVector>,
        reference: &EmbeddingVector,
        temperature: f64,
    ) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::EmptyInput("crop set"));
        }
        let weights = softmax_against(&embeddings, reference, temperature)?;
        Self::new(regions, embeddings, weights)
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Alternative descriptions of one label with normalized weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedDescriptionSet {
    texts: Vec<String>,
    embeddings: Vec<EmbeddingVector>,
    weights: Vec<f64>,
}

impl WeightedDescriptionSet {
    pub fn new(texts: Vec<String>, embeddings: Vec<EmbeddingVector>, weights: Vec<f64>) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::EmptyInput("description set"));
        }
        if texts.len() != embeddings.len() || texts.len() != weights.len() {
            return Err(Error::InvalidParams(format!(
                "description set lengths differ: {} texts, {} embeddings, {} weights",
                texts.len(),
                embeddings.len(),
                weights.len()
            )));
        }
        check_weights(&weights, "description")?;
        Ok(Self {
            texts,
            embeddings,
            weights,
        })
    }

    /// Weights each description by softmax of its cosine to `reference`
    /// (the embedding of the bare label).
    pub fn weighted_against(
        texts: Vec<String>,
        embeddings: Vec<EmbeddingVector>,
        reference: &EmbeddingVector,
        temperature: f64,
    ) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::EmptyInput("description set"));
        }
        let weights = softmax_against(&embeddings, reference, temperature)?;
        Self::new(texts, embeddings, weights)
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `entries[s][t] = w_s * v_t * cos(c_s, d_t)`, stored row-major, and the
/// compensated sum of all entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    score: f64,
}

impl AlignmentMatrix {
    /// Wraps precomputed entries. Mostly useful for tests and tooling.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParams("matrix must be a non-empty rectangle".into()));
        }
        let n_rows = rows.len();
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParams("matrix entries must be finite".into()));
        }
        let score = compensated_sum(entries.iter().copied());
        Ok(Self {
            rows: n_rows,
            cols,
            entries,
            score,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

pub fn build_matrix(crops: &WeightedCropSet, descs: &WeightedDescriptionSet) -> Result<AlignmentMatrix> {
    if crops.is_empty() || descs.is_empty() {
        return Err(Error::EmptyInput("alignment needs crops and descriptions"));
    }
    let mut entries = Vec::with_capacity(crops.len() * descs.len());
    for (c, w) in crops.embeddings.iter().zip(&crops.weights) {
        for (d, v) in descs.embeddings.iter().zip(&descs.weights) {
            entries.push(w * v * cosine(c, d)?);
        }
    }
    let score = compensated_sum(entries.iter().copied());
    Ok(AlignmentMatrix {
        rows: crops.len(),
        cols: descs.len(),
        entries,
        score,
    })
}

/// Result of a top-K pass over an alignment matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionSet {
    /// Selected `(row, col)` cells, best first.
    pub indices: Vec<(usize, usize)>,
    /// Distinct rows of `indices` in first-selected order.
    pub rows: Vec<usize>,
    /// Element comparisons spent on the selection.
    pub comparisons: u64,
}

/// Orders cells best-first: larger value, then smaller `(row, col)`.
pub fn rank_order(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
}

struct Ranked<'c> {
    value: f64,
    row: usize,
    col: usize,
    comparisons: &'c Cell<u64>,
}

impl Ord for Ranked<'_> {
    // greater means worse, so a max-heap keeps the current worst on top
    fn cmp(&self, other: &Self) -> Ordering {
        self.comparisons.set(self.comparisons.get() + 1);
        rank_order(
            (self.value, self.row, self.col),
            (other.value, other.row, other.col),
        )
    }
}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

/// Selects the `k` best cells with a bounded heap: `O(n log k)` comparisons
/// plus `O(k log k)` for the final ordering. `k` is clamped to the matrix
/// size; `k = 0` is treated as 1.
pub fn select_topk(matrix: &AlignmentMatrix, k: usize) -> SelectionSet {
    let k = k.clamp(1, matrix.len());
    let comparisons = Cell::new(0u64);
    let mut heap: BinaryHeap<Ranked<'_>> = BinaryHeap::with_capacity(k + 1);
    for (i, &value) in matrix.entries.iter().enumerate() {
        let cand = Ranked {
            value,
            row: i / matrix.cols,
            col: i % matrix.cols,
            comparisons: &comparisons,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(mut worst) = heap.peek_mut() {
            if cand < *worst {
                *worst = cand;
            }
        }
    }
    let best_first = heap.into_sorted_vec();
    let indices: Vec<(usize, usize)> = best_first.iter().map(|r| (r.row, r.col)).collect();
    drop(best_first);

    let mut rows = Vec::new();
    let mut seen = vec![false; matrix.rows];
    for &(row, _) in &indices {
        if !seen[row] {
            seen[row] = true;
            rows.push(row);
        }
    }
    SelectionSet {
        indices,
        rows,
        comparisons: comparisons.get(),
    }
}
