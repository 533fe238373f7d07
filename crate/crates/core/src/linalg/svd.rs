//! Truncated singular value decomposition by randomized subspace iteration.
//!
//! The matrix is only touched through block products `A·B` and `Aᵀ·B`, so the
//! same routine serves sparse co-occurrence matrices and small dense inputs.
//! Each sweep performs one product with `Aᵀ` and one with `A`, followed by a
//! Rayleigh–Ritz step on the `l = k + oversample` dimensional subspace. The
//! Ritz triplets satisfy `Aᵀ uᵢ = sᵢ vᵢ` exactly by construction; iteration
//! stops once every retained triplet also satisfies
//! `‖A vᵢ − sᵢ uᵢ‖ ≤ tol · s₁`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::DenseMatrix;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Anything that can be multiplied with a dense block from either side.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A · B`
    fn apply(&self, b: &DenseMatrix) -> DenseMatrix;
    /// `Aᵀ · B`
    fn apply_transpose(&self, b: &DenseMatrix) -> DenseMatrix;
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, b: &DenseMatrix) -> DenseMatrix {
        self.mul_dense(b).expect("operator dimensions checked")
    }
    fn apply_transpose(&self, b: &DenseMatrix) -> DenseMatrix {
        self.transpose_mul_dense(b)
            .expect("operator dimensions checked")
    }
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, b: &DenseMatrix) -> DenseMatrix {
        self.matmul(b).expect("operator dimensions checked")
    }
    fn apply_transpose(&self, b: &DenseMatrix) -> DenseMatrix {
        self.transpose_matmul(b)
            .expect("operator dimensions checked")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdOptions {
    /// Extra subspace columns beyond the requested rank.
    pub oversample: usize,
    pub max_iters: usize,
    /// Relative residual threshold, scaled by the largest singular value.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            oversample: 20,
            max_iters: 1000,
            tol: 1e-6,
            seed: 42,
        }
    }
}

/// Rank-`k` factors `A ≈ U diag(S) Vᵀ`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// `rows × k`, orthonormal columns.
    pub u: DenseMatrix,
    /// Descending, nonnegative.
    pub s: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: DenseMatrix,
    pub iterations: usize,
    /// Largest `‖A vᵢ − sᵢ uᵢ‖` over the retained triplets.
    pub max_residual: f64,
}

impl TruncatedSvd {
    /// `U diag(S) Vᵀ`
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.s.iter().enumerate() {
                let v = us.get(i, j) * s;
                us.set(i, j, v);
            }
        }
        us.matmul(&self.v.transpose()).expect("factor shapes agree")
    }
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    m.to_nalgebra()
}

fn orthonormalize(m: &DenseMatrix) -> DenseMatrix {
    let q = to_na(m).qr().q();
    DenseMatrix::from_nalgebra(&q)
}

/// Flip each pair `(uᵢ, vᵢ)` so that the largest-magnitude entry of `uᵢ` is
/// positive.
fn fix_signs(u: &mut DenseMatrix, v: &mut DenseMatrix) {
    for j in 0..u.cols() {
        let mut best = 0.0f64;
        for i in 0..u.rows() {
            let x = u.get(i, j);
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < 0.0 {
            for i in 0..u.rows() {
                u.set(i, j, -u.get(i, j));
            }
            for i in 0..v.rows() {
                v.set(i, j, -v.get(i, j));
            }
        }
    }
}

fn take_cols(m: &DenseMatrix, k: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), k, |i, j| m.get(i, j))
}

/// Top-`k` singular triplets of `a`.
pub fn truncated_svd(
    a: &(impl LinearOperator + ?Sized),
    k: usize,
    opts: &SvdOptions,
) -> Result<TruncatedSvd> {
    let (m, n) = (a.nrows(), a.ncols());
    let full = m.min(n);
    if k == 0 || k > full {
        return Err(Error::invalid(format!(
            "rank {k} outside 1..={full} for a {m}x{n} matrix"
        )));
    }
    let l = (k + opts.oversample).min(full);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let omega = DenseMatrix::from_fn(n, l, |_, _| rng.random_range(-1.0..1.0));
    let mut q = orthonormalize(&a.apply(&omega));

    let mut last_residual = f64::INFINITY;
    for it in 1..=opts.max_iters {
        // B = Aᵀ Q = W R ; R = P Σ Tᵀ  ⇒  Qᵀ A = T Σ (W P)ᵀ
        let b = a.apply_transpose(&q);
        let qr = to_na(&b).qr();
        let w = DenseMatrix::from_nalgebra(&qr.q());
        let r = qr.r();
        let svd = r.svd(true, true);
        let (p, t) = (
            svd.u.expect("requested U"),
            svd.v_t.expect("requested Vᵀ").transpose(),
        );
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
        let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let p = DenseMatrix::from_fn(p.nrows(), order.len(), |i, j| p[(i, order[j])]);
        let t = DenseMatrix::from_fn(t.nrows(), order.len(), |i, j| t[(i, order[j])]);

        let v = w.matmul(&p)?;
        let u = q.matmul(&t)?;
        let y = a.apply(&w);
        let av = y.matmul(&p)?;

        let s1 = s.first().copied().unwrap_or(0.0);
        let mut worst: f64 = 0.0;
        for (j, &sj) in s.iter().enumerate().take(k) {
            let mut r2 = 0.0;
            for i in 0..m {
                let d = av.get(i, j) - sj * u.get(i, j);
                r2 += d * d;
            }
            worst = worst.max(r2.sqrt());
        }
        if !worst.is_finite() {
            return Err(Error::NonFinite("truncated svd"));
        }
        last_residual = worst;
        if worst <= opts.tol * s1 {
            let mut u = take_cols(&u, k);
            let mut v = take_cols(&v, k);
            fix_signs(&mut u, &mut v);
            log::debug!("truncated svd: rank {k} converged in {it} sweeps");
            return Ok(TruncatedSvd {
                u,
                s: s[..k].to_vec(),
                v,
                iterations: it,
                max_residual: worst,
            });
        }
        q = orthonormalize(&y);
    }
    Err(Error::NonConvergence {
        what: "truncated svd",
        iterations: opts.max_iters,
        residual: last_residual,
    })
}
