use std::cmp::Ordering;

use rayon::prelude::*;

use super::dense::{dot, norm, DenseMatrix};

/// A neighbor index and its cosine similarity to the query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub similarity: f64,
}

/// Descending similarity, then ascending index.
#[inline]
pub(crate) fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then(a.index.cmp(&b.index))
}

/// Cosine similarity; zero vectors have similarity 0 with everything.
#[inline]
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Keeps the `k` best candidates under [`rank_order`], sorted.
pub(crate) fn top_k(mut cands: Vec<Neighbor>, k: usize) -> Vec<Neighbor> {
    if k == 0 {
        return Vec::new();
    }
    if cands.len() > k {
        cands.select_nth_unstable_by(k - 1, rank_order);
        cands.truncate(k);
    }
    cands.sort_unstable_by(rank_order);
    cands
}

/// Exact cosine k-nearest-neighbor search over the rows of `corpus`.
///
/// Returns at most `k` neighbors in descending similarity, ties going to the
/// lower index. `exclude` is never returned. When fewer than `k` rows are
/// usable the list is simply shorter.
pub fn cosine_knn(
    query: &[f64],
    corpus: &DenseMatrix,
    k: usize,
    exclude: Option<usize>,
) -> Vec<Neighbor> {
    CosineIndex::new(corpus).search(query, k, exclude)
}

/// Corpus with precomputed row norms for repeated cosine queries.
#[derive(Clone, Debug)]
pub struct CosineIndex<'a> {
    corpus: &'a DenseMatrix,
    norms: Vec<f64>,
}

impl<'a> CosineIndex<'a> {
    pub fn new(corpus: &'a DenseMatrix) -> Self {
        let norms = corpus.row_iter().map(norm).collect();
        CosineIndex { corpus, norms }
    }

    pub fn len(&self) -> usize {
        self.corpus.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.rows() == 0
    }

    pub fn similarity(&self, query: &[f64], query_norm: f64, i: usize) -> f64 {
        let rn = self.norms[i];
        if query_norm == 0.0 || rn == 0.0 {
            0.0
        } else {
            dot(query, self.corpus.row(i)) / (query_norm * rn)
        }
    }

    pub fn search(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.corpus.cols(), "query dimension");
        let qn = norm(query);
        let n = self.len();
        // Per-row similarities are independent, so the result does not depend
        // on how rayon splits the range.
        let cands: Vec<Neighbor> = if n >= 4096 {
            (0..n)
                .into_par_iter()
                .filter(|&i| Some(i) != exclude)
                .map(|i| Neighbor {
                    index: i,
                    similarity: self.similarity(query, qn, i),
                })
                .collect()
        } else {
            (0..n)
                .filter(|&i| Some(i) != exclude)
                .map(|i| Neighbor {
                    index: i,
                    similarity: self.similarity(query, qn, i),
                })
                .collect()
        };
        top_k(cands, k)
    }
}
