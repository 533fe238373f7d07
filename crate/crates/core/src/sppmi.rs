//! Pointwise mutual information transforms of co-occurrence matrices.
//!
//! SGNS with `k` negative samples implicitly factorizes the shifted positive
//! PMI matrix `max(PMI − log k, 0)`. Zero counts leave PMI undefined; those
//! entries are treated as uninformative and become 0 after the clamp.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    top_k, CooccurrenceMatrix, LabelMatrix, Neighbor, SparseBuilder, SparseMatrix,
};

/// PMI values on the defined entries (positive count, positive marginals).
/// Entries not stored are undefined. Stored values may be zero or negative.
#[derive(Clone, Debug, PartialEq)]
pub struct PmiMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(u32, f64)>>,
}

impl PmiMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `None` where PMI is undefined.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let r = &self.entries[i];
        r.binary_search_by_key(&(j as u32), |e| e.0)
            .ok()
            .map(|p| r[p].1)
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.entries[i]
    }

    pub fn num_defined(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }
}

/// Clamped, shifted PMI matrix ready for factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct SppmiMatrix {
    /// Stored entries are all strictly positive.
    pub matrix: SparseMatrix,
    /// The `log k` subtracted before clamping.
    pub shift: f64,
}

impl SppmiMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

fn check_counts(m: &CooccurrenceMatrix) -> Result<f64> {
    if m.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid(
            "co-occurrence matrix must be finite and nonnegative",
        ));
    }
    let total = m.total();
    if total <= 0.0 {
        return Err(Error::invalid("co-occurrence matrix is all zero"));
    }
    Ok(total)
}

/// `PMI_ij = log(M_ij·|M| / (rowsum_i · colsum_j))` on the defined entries.
pub fn pmi(m: &CooccurrenceMatrix) -> Result<PmiMatrix> {
    let total = check_counts(m)?;
    let rs = m.row_sums();
    let cs = m.col_sums();
    let entries = (0..m.rows())
        .map(|i| {
            m.row_entries(i)
                .filter(|&(j, v)| v > 0.0 && rs[i] > 0.0 && cs[j] > 0.0)
                .map(|(j, v)| (j as u32, (v * total / (rs[i] * cs[j])).ln()))
                .collect()
        })
        .collect();
    Ok(PmiMatrix {
        rows: m.rows(),
        cols: m.cols(),
        entries,
    })
}

fn clamp_shifted(p: &PmiMatrix, shift: f64) -> SparseMatrix {
    let mut b = SparseBuilder::new(p.cols);
    for r in &p.entries {
        for &(j, v) in r {
            let s = v - shift;
            if s > 0.0 {
                b.push(j, s);
            }
        }
        b.finish_row();
    }
    b.build()
}

/// `max(PMI − log(neg_samples), 0)`; undefined entries map to 0.
pub fn sppmi(m: &CooccurrenceMatrix, neg_samples: f64) -> Result<SppmiMatrix> {
    // NaN fails this comparison as well.
    if !(neg_samples >= 1.0) {
        return Err(Error::invalid(format!(
            "negative sample count {neg_samples} must be >= 1"
        )));
    }
    let shift = neg_samples.ln();
    let p = pmi(m)?;
    Ok(SppmiMatrix {
        matrix: clamp_shifted(&p, shift),
        shift,
    })
}

/// Shifted log-conditional-probability matrix, the NCE counterpart of SPPMI:
/// `K_ij = log(M_ij / colsum_j) − log(neg_samples)`, clamped at 0 and
/// symmetrized as `(K + Kᵀ)/2`.
pub fn shifted_log_cond_prob(m: &CooccurrenceMatrix, neg_samples: f64) -> Result<SppmiMatrix> {
    if !(neg_samples > 0.0) {
        return Err(Error::invalid(format!(
            "shift parameter {neg_samples} must be positive"
        )));
    }
    check_dim("log-conditional-probability matrix", m.rows(), m.cols())?;
    check_counts(m)?;
    let shift = neg_samples.ln();
    let cs = m.col_sums();
    let k = m.map_values(|_, j, v| {
        if cs[j] > 0.0 {
            ((v / cs[j]).ln() - shift).max(0.0)
        } else {
            0.0
        }
    });
    let kt = k.transpose();
    let sym = SparseMatrix::from_triplets(
        k.rows(),
        k.cols(),
        (0..k.rows()).flat_map(|i| {
            k.row_entries(i)
                .chain(kt.row_entries(i))
                .map(move |(j, v)| (i, j, 0.5 * v))
                .collect::<Vec<_>>()
        }),
    )?;
    Ok(SppmiMatrix { matrix: sym, shift })
}

/// Weights of the three objective terms: label–label (`mu1`), instance–
/// instance (`mu2`) and instance–label (`mu3`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointWeights {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl JointWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mu1, self.mu2, self.mu3];
        if all.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid(
                "joint weights must be finite and nonnegative",
            ));
        }
        if all.iter().all(|&m| m == 0.0) {
            return Err(Error::invalid("at least one joint weight must be positive"));
        }
        Ok(())
    }
}

/// Block matrix `[[μ2·M, μ3·Y], [μ3·Yᵀ, μ1·C]]` of order `n + L`.
pub fn build_joint_matrix(
    m: &CooccurrenceMatrix,
    y: &LabelMatrix,
    c: &CooccurrenceMatrix,
    w: JointWeights,
) -> Result<CooccurrenceMatrix> {
    w.validate()?;
    let (n, num_labels) = (y.rows(), y.num_labels());
    check_dim("instance gram rows", n, m.rows())?;
    check_dim("instance gram cols", n, m.cols())?;
    check_dim("label correlation rows", num_labels, c.rows())?;
    check_dim("label correlation cols", num_labels, c.cols())?;
    let yt = y.to_sparse().transpose();
    let off = n as u32;
    let mut b = SparseBuilder::new(n + num_labels);
    for i in 0..n {
        for (j, v) in m.row_entries(i) {
            b.push(j as u32, w.mu2 * v);
        }
        for &l in y.row(i) {
            b.push(off + l, w.mu3);
        }
        b.finish_row();
    }
    for l in 0..num_labels {
        for (i, _) in yt.row_entries(l) {
            b.push(i as u32, w.mu3);
        }
        for (j, v) in c.row_entries(l) {
            b.push(off + j as u32, w.mu1 * v);
        }
        b.finish_row();
    }
    Ok(b.build())
}

/// Keeps off-diagonal entry `(i, j)` only when `j` is among the `k` most
/// cosine-similar rows of `i` and vice versa, similarity being
/// `M_ij / sqrt(M_ii · M_jj)`. The diagonal is kept.
pub fn sparsify_mutual_knn(m: &CooccurrenceMatrix, k: usize) -> Result<CooccurrenceMatrix> {
    check_dim("mutual knn sparsification", m.rows(), m.cols())?;
    let diag: Vec<f64> = (0..m.rows()).map(|i| m.get(i, i)).collect();
    let tops: Vec<Vec<usize>> = (0..m.rows())
        .map(|i| {
            let cands = m
                .row_entries(i)
                .filter(|&(j, _)| j != i)
                .map(|(j, v)| {
                    let denom = (diag[i] * diag[j]).sqrt();
                    Neighbor {
                        index: j,
                        similarity: if denom > 0.0 { v / denom } else { 0.0 },
                    }
                })
                .collect();
            let mut t: Vec<usize> = top_k(cands, k).into_iter().map(|n| n.index).collect();
            t.sort_unstable();
            t
        })
        .collect();
    Ok(m.map_values(|i, j, v| {
        if i == j || (tops[i].binary_search(&j).is_ok() && tops[j].binary_search(&i).is_ok()) {
            v
        } else {
            0.0
        }
    }))
}

/// Drops the diagonal of a square matrix.
pub fn zero_diagonal(m: &CooccurrenceMatrix) -> CooccurrenceMatrix {
    m.map_values(|i, j, v| if i == j { 0.0 } else { v })
}
