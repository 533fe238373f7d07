use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{top_k, LabelMatrix, Neighbor};

/// Directed `(instance, context)` pairs over a universe of `universe` items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextPairs {
    pairs: Vec<(u32, u32)>,
    universe: usize,
}

impl ContextPairs {
    /// Rejects self-pairs and out-of-range indices.
    pub fn new(universe: usize, pairs: Vec<(u32, u32)>) -> Result<Self> {
        for &(i, j) in &pairs {
            if i == j {
                return Err(Error::invalid(format!("self pair ({i}, {j})")));
            }
            if i as usize >= universe || j as usize >= universe {
                return Err(Error::invalid(format!(
                    "pair ({i}, {j}) outside universe of {universe}"
                )));
            }
        }
        Ok(ContextPairs { pairs, universe })
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn as_slice(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    /// Number of pairs per context (second) index.
    pub fn context_counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.universe];
        for &(_, j) in &self.pairs {
            c[j as usize] += 1;
        }
        c
    }

    /// Number of pairs per source (first) index.
    pub fn source_counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.universe];
        for &(i, _) in &self.pairs {
            c[i as usize] += 1;
        }
        c
    }
}

/// For every instance with a nonzero label vector, pairs with its `k` nearest
/// other instances by cosine similarity of label vectors. Ties, including the
/// many zero-similarity rows, go to the lower index.
pub fn build_context_pairs(labels: &LabelMatrix, k: usize) -> Result<ContextPairs> {
    if k == 0 {
        return Err(Error::invalid("context neighborhood size must be >= 1"));
    }
    let n = labels.rows();
    let postings = labels.label_postings();
    let norms: Vec<f64> = labels.row_iter().map(|r| (r.len() as f64).sqrt()).collect();
    let per_row: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0u32; n], Vec::new()),
            |(acc, touched), i| {
                let row = labels.row(i);
                if row.is_empty() {
                    return Vec::new();
                }
                for &l in row {
                    for &j in &postings[l as usize] {
                        if j as usize != i {
                            if acc[j as usize] == 0 {
                                touched.push(j);
                            }
                            acc[j as usize] += 1;
                        }
                    }
                }
                let cands: Vec<Neighbor> = touched
                    .drain(..)
                    .map(|j| Neighbor {
                        index: j as usize,
                        similarity: f64::from(std::mem::take(&mut acc[j as usize]))
                            / (norms[i] * norms[j as usize]),
                    })
                    .collect();
                let mut chosen: Vec<usize> =
                    top_k(cands, k).into_iter().map(|nb| nb.index).collect();
                if chosen.len() < k {
                    // Remaining slots go to zero-similarity rows by index.
                    let mut taken = chosen.clone();
                    taken.sort_unstable();
                    let need = k - chosen.len();
                    chosen.extend(
                        (0..n)
                            .filter(|&j| j != i && taken.binary_search(&j).is_err())
                            .take(need),
                    );
                }
                chosen.into_iter().map(|j| (i as u32, j as u32)).collect()
            },
        )
        .collect();
    ContextPairs::new(n, per_row.into_iter().flatten().collect())
}
