use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("dense matrix buffer", rows * cols, data.len())?;
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. `cols` is only consulted when
    /// `rows` is empty.
    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(cols, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("dense matrix row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so zero-width matrices yield empty rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("matrix difference rows", self.rows, other.rows)?;
        check_dim("matrix difference cols", self.cols, other.cols)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Matrix product; each output row is computed sequentially, so the result
    /// does not depend on the thread count.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("matrix product inner dimension", self.cols, other.rows)?;
        let k = other.cols;
        let mut out = DenseMatrix::zeros(self.rows, k);
        if k == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(i, orow)| {
                for (p, &a) in self.row(i).iter().enumerate() {
                    if a != 0.0 {
                        axpy(a, other.row(p), orow);
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn transpose_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("transposed product rows", self.rows, other.rows)?;
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for p in 0..self.rows {
            let a = self.row(p);
            let b = other.row(p);
            for (i, &ai) in a.iter().enumerate() {
                if ai != 0.0 {
                    axpy(ai, b, out.row_mut(i));
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("matrix-vector product", self.cols, x.len())?;
        Ok(self.row_iter().map(|r| dot(r, x)).collect())
    }

    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// First `count` rows and the remainder.
    pub fn split_rows(&self, count: usize) -> Result<(DenseMatrix, DenseMatrix)> {
        if count > self.rows {
            return Err(Error::DimensionMismatch {
                context: "row split",
                expected: self.rows,
                actual: count,
            });
        }
        let (a, b) = self.data.split_at(count * self.cols);
        Ok((
            DenseMatrix {
                rows: count,
                cols: self.cols,
                data: a.to_vec(),
            },
            DenseMatrix {
                rows: self.rows - count,
                cols: self.cols,
                data: b.to_vec(),
            },
        ))
    }

    pub fn vstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim("vertical stack", self.cols, other.cols)?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(DenseMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
