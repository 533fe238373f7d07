//! Row storage for stochastic updates, shared either exclusively
//! (deterministic mode) or lock-free across worker threads.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::linalg::DenseMatrix;

/// How stochastic optimizers apply their updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UpdateMode {
    /// Single thread, reproducible for a given seed.
    #[default]
    Deterministic,
    /// Lock-free updates from several workers; results vary run to run.
    Async { threads: usize },
}

pub(crate) trait RowStore {
    fn read(&self, row: usize, out: &mut [f64]);
    fn add(&mut self, row: usize, delta: &[f64], scale: f64);
}

impl RowStore for DenseMatrix {
    #[inline]
    fn read(&self, row: usize, out: &mut [f64]) {
        out.copy_from_slice(DenseMatrix::row(self, row));
    }

    #[inline]
    fn add(&mut self, row: usize, delta: &[f64], scale: f64) {
        crate::linalg::axpy(scale, delta, self.row_mut(row));
    }
}

/// Matrix of `f64` stored as atomics; concurrent adds may be lost, which the
/// optimizers tolerate.
pub(crate) struct AtomicRows {
    dim: usize,
    data: Vec<AtomicU64>,
}

impl AtomicRows {
    pub(crate) fn from_dense(m: &DenseMatrix) -> Self {
        AtomicRows {
            dim: m.cols(),
            data: m
                .as_slice()
                .iter()
                .map(|v| AtomicU64::new(v.to_bits()))
                .collect(),
        }
    }

    pub(crate) fn to_dense(&self, rows: usize) -> DenseMatrix {
        let data = self
            .data
            .iter()
            .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
            .collect();
        DenseMatrix::from_vec(rows, self.dim, data).expect("atomic buffer shape")
    }

    pub(crate) fn view(&self) -> AtomicView<'_> {
        AtomicView { rows: self }
    }
}

/// Per-worker handle onto [`AtomicRows`].
pub(crate) struct AtomicView<'a> {
    rows: &'a AtomicRows,
}

impl RowStore for AtomicView<'_> {
    #[inline]
    fn read(&self, row: usize, out: &mut [f64]) {
        let d = self.rows.dim;
        for (o, a) in out.iter_mut().zip(&self.rows.data[row * d..(row + 1) * d]) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn add(&mut self, row: usize, delta: &[f64], scale: f64) {
        let d = self.rows.dim;
        for (x, a) in delta.iter().zip(&self.rows.data[row * d..(row + 1) * d]) {
            let cur = f64::from_bits(a.load(Ordering::Relaxed));
            a.store((cur + scale * x).to_bits(), Ordering::Relaxed);
        }
    }
}
