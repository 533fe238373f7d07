use rayon::prelude::*;

use super::dense::{axpy, DenseMatrix};
use crate::error::{check_dim, Error, Result};

/// Compressed sparse row matrix of `f64`.
///
/// Column indices are strictly increasing within each row and no explicit
/// zeros are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

/// Symmetric nonnegative co-occurrence / weight matrix.
pub type CooccurrenceMatrix = SparseMatrix;

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from per-row `(col, value)` entries. Entries are sorted, zeros
    /// dropped; a repeated column within a row is an error.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let mut b = SparseBuilder::new(cols);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.sort_unstable_by_key(|e| e.0);
            if let Some(w) = r.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid(format!(
                    "duplicate column {} in row {i}",
                    w[0].0
                )));
            }
            for (c, v) in r {
                if c as usize >= cols {
                    return Err(Error::invalid(format!(
                        "column {c} out of range {cols} in row {i}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("sparse matrix entry"));
                }
                b.push(c, v);
            }
            b.finish_row();
        }
        Ok(b.build())
    }

    /// Builds from unordered triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut per_row: Vec<Vec<(u32, f64)>> = vec![Vec::new(); rows];
        for (i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::invalid(format!(
                    "triplet ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            per_row[i].push((j as u32, v));
        }
        let mut b = SparseBuilder::new(cols);
        for mut r in per_row {
            r.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < r.len() {
                let c = r[k].0;
                let mut s = 0.0;
                while k < r.len() && r[k].0 == c {
                    s += r[k].1;
                    k += 1;
                }
                b.push(c, s);
            }
            b.finish_row();
        }
        Ok(b.build())
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut b = SparseBuilder::new(m.cols());
        for r in m.row_iter() {
            for (j, &v) in r.iter().enumerate() {
                b.push(j as u32, v);
            }
            b.finish_row();
        }
        b.build()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + Clone + '_ {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        match idx.binary_search(&(j as u32)) {
            Ok(p) => val[p],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                let p = next[j];
                indices[p] = i as u32;
                values[p] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Column sums, accumulated in row order.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                s[j] += v;
            }
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Largest |A_ij - A_ji|; `None` when not square.
    pub fn asymmetry(&self) -> Option<f64> {
        if self.rows != self.cols {
            return None;
        }
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row_entries(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        Some(worst)
    }

    /// Applies `f` to every stored value, dropping results that become zero.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut b = SparseBuilder::new(self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                b.push(j as u32, f(i, j, v));
            }
            b.finish_row();
        }
        b.build()
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        self.map_values(|_, _, v| v * s)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("sparse matrix-vector product", self.cols, x.len())?;
        Ok((0..self.rows)
            .into_par_iter()
            .map(|i| self.row_entries(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    /// `A · B` for a dense block `B`, row-partitioned.
    pub fn mul_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("sparse-dense product", self.cols, b.rows())?;
        let k = b.cols();
        let mut out = DenseMatrix::zeros(self.rows, k);
        if k == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(i, orow)| {
                for (j, v) in self.row_entries(i) {
                    axpy(v, b.row(j), orow);
                }
            });
        Ok(out)
    }

    /// `Aᵀ · B` for a dense block `B`.
    pub fn transpose_mul_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("transposed sparse-dense product", self.rows, b.rows())?;
        let mut out = DenseMatrix::zeros(self.cols, b.cols());
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                axpy(v, b.row(i), out.row_mut(j));
            }
        }
        Ok(out)
    }

    /// Sub-matrix restricted to the given rows (in order).
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut b = SparseBuilder::new(self.cols);
        for &i in rows {
            let (idx, val) = self.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                b.push(c, v);
            }
            b.finish_row();
        }
        b.build()
    }

    /// Dot product of row `i` with a dense vector.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row_entries(i).map(|(j, v)| v * x[j]).sum()
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Incremental CSR construction; zeros pushed are skipped.
pub(crate) struct SparseBuilder {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseBuilder {
    pub(crate) fn new(cols: usize) -> Self {
        SparseBuilder {
            cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Columns must be pushed in increasing order within a row.
    #[inline]
    pub(crate) fn push(&mut self, col: u32, value: f64) {
        if value != 0.0 {
            debug_assert!(
                self.indices.len() == *self.indptr.last().unwrap()
                    || *self.indices.last().unwrap() < col
            );
            self.indices.push(col);
            self.values.push(value);
        }
    }

    pub(crate) fn finish_row(&mut self) {
        self.indptr.push(self.indices.len());
    }

    pub(crate) fn build(self) -> SparseMatrix {
        SparseMatrix {
            rows: self.indptr.len() - 1,
            cols: self.cols,
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
        }
    }
}

/// Sparse binary relevance matrix; only the positions of ones are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMatrix {
    num_labels: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
}

impl LabelMatrix {
    /// Label lists are sorted and deduplicated.
    pub fn from_rows(num_labels: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        for (i, mut r) in rows.into_iter().enumerate() {
            r.sort_unstable();
            r.dedup();
            if let Some(&l) = r.last() {
                if l as usize >= num_labels {
                    return Err(Error::invalid(format!(
                        "label {l} out of range {num_labels} in row {i}"
                    )));
                }
            }
            indices.extend(r);
            indptr.push(indices.len());
        }
        Ok(LabelMatrix {
            num_labels,
            indptr,
            indices,
        })
    }

    pub fn empty(rows: usize, num_labels: usize) -> Self {
        LabelMatrix {
            num_labels,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    #[inline]
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn contains(&self, i: usize, label: u32) -> bool {
        self.row(i).binary_search(&label).is_ok()
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.rows()).map(move |i| self.row(i))
    }

    /// All `(row, label)` coordinates in row-major order.
    pub fn coordinates(&self) -> Vec<(usize, u32)> {
        (0..self.rows())
            .flat_map(|i| self.row(i).iter().map(move |&l| (i, l)))
            .collect()
    }

    /// Per label, the instances carrying it (ascending).
    pub fn label_postings(&self) -> Vec<Vec<u32>> {
        let mut post = vec![Vec::new(); self.num_labels];
        for (i, r) in self.row_iter().enumerate() {
            for &l in r {
                post[l as usize].push(i as u32);
            }
        }
        post
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix {
            rows: self.rows(),
            cols: self.num_labels,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: vec![1.0; self.indices.len()],
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.to_sparse().to_dense()
    }

    pub fn select_rows(&self, rows: &[usize]) -> LabelMatrix {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        for &i in rows {
            indices.extend_from_slice(self.row(i));
            indptr.push(indices.len());
        }
        LabelMatrix {
            num_labels: self.num_labels,
            indptr,
            indices,
        }
    }
}
