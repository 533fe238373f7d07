//! Ridge regression from sparse features to embeddings:
//! `min_V ‖X Vᵀ − Z‖²_F + λ‖V‖²_F`.
//!
//! The ADMM solver splits `W = Vᵀ` into a least-squares copy and a ridge copy
//! (`W = G`). The least-squares step solves `(2XᵀX + ρI) W = 2XᵀZ + ρ(G − U)`
//! with a single factorization: directly when `d ≤ n`, otherwise through the
//! Woodbury identity on the `n × n` matrix `ρ/2·I + XXᵀ`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::Regressor;
use crate::embed::{EmbeddingMatrix, Similarity};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct AdmmOptions {
    pub lambda: f64,
    pub rho: f64,
    pub max_iters: usize,
    /// Residual threshold, relative to the scale of the iterates.
    pub tol: f64,
}

impl AdmmOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        AdmmOptions {
            lambda,
            ..AdmmOptions::default()
        }
    }
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            lambda: 0.0,
            rho: 1.0,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

/// Solution plus solver diagnostics.
#[derive(Clone, Debug)]
pub struct AdmmFit {
    pub regressor: Regressor,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

/// Scale-aware default ridge weight `0.01 · trace(XᵀX) / d`.
pub fn default_lambda(x: &SparseMatrix) -> f64 {
    if x.cols() == 0 {
        return 0.0;
    }
    let tr: f64 = x.values().iter().map(|v| v * v).sum();
    0.01 * tr / x.cols() as f64
}

/// `‖X Vᵀ − Z‖²_F + λ‖V‖²_F`
pub fn ridge_objective(x: &SparseMatrix, z: &EmbeddingMatrix, v: &DenseMatrix, lambda: f64) -> f64 {
    let pred = x.mul_dense(&v.transpose()).expect("regressor shape");
    let fit = pred
        .sub(z)
        .expect("embedding shape")
        .frobenius_norm()
        .powi(2);
    fit + lambda * v.frobenius_norm().powi(2)
}

fn check_inputs(x: &SparseMatrix, z: &EmbeddingMatrix, lambda: f64) -> Result<()> {
    check_dim("regression rows", x.rows(), z.rows())?;
    if !z.is_finite() {
        return Err(Error::NonFinite("regression targets"));
    }
    if x.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression features"));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "ridge weight {lambda} must be >= 0"
        )));
    }
    Ok(())
}

/// Dense `XᵀX` accumulated from sparse rows.
fn feature_gram(x: &SparseMatrix) -> DMatrix<f64> {
    let d = x.cols();
    let mut g = DMatrix::<f64>::zeros(d, d);
    for i in 0..x.rows() {
        let (idx, val) = x.row(i);
        for (a, (&p, &vp)) in idx.iter().zip(val).enumerate() {
            for (&q, &vq) in idx[..=a].iter().zip(val) {
                g[(p as usize, q as usize)] += vp * vq;
            }
        }
    }
    g.fill_upper_triangle_with_lower_triangle();
    g
}

/// Dense `XXᵀ` from sparse row dot products.
fn instance_gram(x: &SparseMatrix) -> DMatrix<f64> {
    let n = x.rows();
    let xt = x.transpose();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (f, vi) in x.row_entries(i) {
            for (j, vj) in xt.row_entries(f) {
                if j <= i {
                    g[(i, j)] += vi * vj;
                }
            }
        }
    }
    g.fill_upper_triangle_with_lower_triangle();
    g
}

fn cholesky(mut m: DMatrix<f64>, shift: f64) -> Result<Cholesky<f64, Dyn>> {
    for i in 0..m.nrows() {
        m[(i, i)] += shift;
    }
    Cholesky::new(m).ok_or(Error::NonFinite("ridge system is not positive definite"))
}

/// Applies `(2XᵀX + ρI)⁻¹` to a `d × k` block.
enum LsqSolver {
    Primal(Cholesky<f64, Dyn>),
    /// Factor of `ρ/2·I + XXᵀ`.
    Woodbury(Cholesky<f64, Dyn>, f64),
}

impl LsqSolver {
    fn new(x: &SparseMatrix, rho: f64) -> Result<Self> {
        if x.cols() <= x.rows() {
            let g = feature_gram(x) * 2.0;
            Ok(LsqSolver::Primal(cholesky(g, rho)?))
        } else {
            Ok(LsqSolver::Woodbury(
                cholesky(instance_gram(x), rho / 2.0)?,
                rho,
            ))
        }
    }

    fn solve(&self, x: &SparseMatrix, rhs: &DenseMatrix) -> DenseMatrix {
        match self {
            LsqSolver::Primal(ch) => DenseMatrix::from_nalgebra(&ch.solve(&rhs.to_nalgebra())),
            LsqSolver::Woodbury(ch, rho) => {
                // (1/ρ)[b − Xᵀ(ρ/2·I + XXᵀ)⁻¹ X b]
                let xb = x.mul_dense(rhs).expect("solver shapes");
                let t = DenseMatrix::from_nalgebra(&ch.solve(&xb.to_nalgebra()));
                let xtt = x.transpose_mul_dense(&t).expect("solver shapes");
                let mut out = rhs.sub(&xtt).expect("solver shapes");
                out.scale(1.0 / rho);
                out
            }
        }
    }
}

/// Ridge regression by ADMM.
pub fn admm_ridge(x: &SparseMatrix, z: &EmbeddingMatrix, opts: &AdmmOptions) -> Result<AdmmFit> {
    check_inputs(x, z, opts.lambda)?;
    if !(opts.rho > 0.0) || !opts.rho.is_finite() {
        return Err(Error::invalid(format!(
            "ADMM penalty {} must be > 0",
            opts.rho
        )));
    }
    let (d, k) = (x.cols(), z.cols());
    let rho = opts.rho;
    let solver = LsqSolver::new(x, rho)?;
    let mut xtz = x.transpose_mul_dense(z)?;
    xtz.scale(2.0);

    let mut w = DenseMatrix::zeros(d, k);
    let mut g = DenseMatrix::zeros(d, k);
    let mut u = DenseMatrix::zeros(d, k);
    let shrink = rho / (2.0 * opts.lambda + rho);
    let scale0 = ((d * k) as f64).sqrt();
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=opts.max_iters {
        iterations = it;
        let mut rhs = xtz.clone();
        for ((r, gv), uv) in rhs
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(u.as_slice())
        {
            *r += rho * (gv - uv);
        }
        w = solver.solve(x, &rhs);
        let g_prev = std::mem::replace(&mut g, DenseMatrix::zeros(d, k));
        for ((gv, wv), uv) in g
            .as_mut_slice()
            .iter_mut()
            .zip(w.as_slice())
            .zip(u.as_slice())
        {
            *gv = shrink * (wv + uv);
        }
        let mut r2 = 0.0;
        let mut s2 = 0.0;
        for (((uv, wv), gv), gp) in u
            .as_mut_slice()
            .iter_mut()
            .zip(w.as_slice())
            .zip(g.as_slice())
            .zip(g_prev.as_slice())
        {
            let r = wv - gv;
            *uv += r;
            r2 += r * r;
            s2 += (gv - gp) * (gv - gp);
        }
        r_norm = r2.sqrt();
        s_norm = rho * s2.sqrt();
        if !r_norm.is_finite() || !s_norm.is_finite() {
            return Err(Error::NonFinite("ADMM iterates"));
        }
        let eps_pri = opts.tol * (scale0 + w.frobenius_norm().max(g.frobenius_norm()));
        let eps_dual = opts.tol * (scale0 + rho * u.frobenius_norm());
        if r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "ADMM stopped after {iterations} iterations (primal {r_norm:.2e}, dual {s_norm:.2e})"
        );
    }
    Ok(AdmmFit {
        regressor: Regressor {
            v: w.transpose(),
            lambda: opts.lambda,
            similarity: Similarity::Dot,
        },
        iterations,
        primal_residual: r_norm,
        dual_residual: s_norm,
        converged,
    })
}

/// Exact ridge solution from the normal equations (or their dual form when
/// `d > n`). Requires `λ > 0` unless the relevant gram matrix is definite.
pub fn direct_ridge(x: &SparseMatrix, z: &EmbeddingMatrix, lambda: f64) -> Result<Regressor> {
    check_inputs(x, z, lambda)?;
    let w = if x.cols() <= x.rows() {
        let ch = cholesky(feature_gram(x), lambda)?;
        let xtz = x.transpose_mul_dense(z)?;
        DenseMatrix::from_nalgebra(&ch.solve(&xtz.to_nalgebra()))
    } else {
        // W = Xᵀ (XXᵀ + λI)⁻¹ Z
        let ch = cholesky(instance_gram(x), lambda)?;
        let a = DenseMatrix::from_nalgebra(&ch.solve(&z.to_nalgebra()));
        x.transpose_mul_dense(&a)?
    };
    Ok(Regressor {
        v: w.transpose(),
        lambda,
        similarity: Similarity::Dot,
    })
}

/// Which ridge solver the training pipeline uses.
#[derive(Clone, Debug, PartialEq)]
pub enum RidgeSolver {
    Admm(AdmmOptions),
    Direct {
        lambda: f64,
    },
    /// Direct solve for `d ≤ 2000` features, ADMM otherwise.
    Auto(AdmmOptions),
}

pub fn solve_ridge(
    x: &SparseMatrix,
    z: &EmbeddingMatrix,
    solver: &RidgeSolver,
) -> Result<Regressor> {
    match solver {
        RidgeSolver::Direct { lambda } => direct_ridge(x, z, *lambda),
        RidgeSolver::Auto(o) if x.cols() <= 2000 => direct_ridge(x, z, o.lambda),
        RidgeSolver::Admm(o) | RidgeSolver::Auto(o) => Ok(admm_ridge(x, z, o)?.regressor),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tight() -> AdmmOptions {
        AdmmOptions {
            lambda: 0.0,
            rho: 1.0,
            max_iters: 5000,
            tol: 1e-12,
        }
    }

    #[test]
    fn identity_features_interpolate() {
        let x = SparseMatrix::from_dense(&DenseMatrix::identity(4));
        let z = DenseMatrix::from_fn(4, 2, |i, j| (i as f64) - 2.0 * j as f64);
        let fit = admm_ridge(&x, &z, &tight()).unwrap();
        assert!(fit.converged);
        let diff = fit.regressor.v.sub(&z.transpose()).unwrap();
        assert!(diff.frobenius_norm() < 1e-9, "{}", diff.frobenius_norm());
    }

    #[test]
    fn zero_targets_give_zero_regressor() {
        let x = SparseMatrix::from_dense(&DenseMatrix::from_fn(5, 3, |i, j| ((i + j) % 3) as f64));
        let z = DenseMatrix::zeros(5, 2);
        let fit = admm_ridge(&x, &z, &AdmmOptions::with_lambda(0.3)).unwrap();
        assert_eq!(fit.regressor.v.frobenius_norm(), 0.0);
        let v = direct_ridge(&x, &z, 0.3).unwrap().v;
        assert_eq!(v.frobenius_norm(), 0.0);
    }

    #[test]
    fn wide_problem_uses_woodbury() {
        // d > n, so both solvers go through the dual system.
        let x = SparseMatrix::from_dense(&DenseMatrix::from_fn(3, 6, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 1.5
        }));
        let z = DenseMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 * 0.3);
        let lambda = 0.2;
        let direct = direct_ridge(&x, &z, lambda).unwrap();
        let fit = admm_ridge(&x, &z, &AdmmOptions { lambda, ..tight() }).unwrap();
        let diff = fit.regressor.v.sub(&direct.v).unwrap().frobenius_norm();
        assert!(diff < 1e-8, "{diff}");
        // stationarity of the direct solution: Xᵀ(XW − Z) + λW = 0
        let w = direct.v.transpose();
        let resid = x.mul_dense(&w).unwrap().sub(&z).unwrap();
        let grad = x.transpose_mul_dense(&resid).unwrap();
        for (g, wv) in grad.as_slice().iter().zip(w.as_slice()) {
            assert_abs_diff_eq!(g + lambda * wv, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn input_errors() {
        let x = SparseMatrix::from_dense(&DenseMatrix::identity(3));
        assert!(admm_ridge(&x, &DenseMatrix::zeros(2, 1), &AdmmOptions::default()).is_err());
        let mut z = DenseMatrix::zeros(3, 1);
        z.set(0, 0, f64::NAN);
        assert!(admm_ridge(&x, &z, &AdmmOptions::default()).is_err());
        let z = DenseMatrix::zeros(3, 1);
        assert!(admm_ridge(
            &x,
            &z,
            &AdmmOptions {
                rho: 0.0,
                ..AdmmOptions::default()
            }
        )
        .is_err());
        assert!(admm_ridge(&x, &z, &AdmmOptions::with_lambda(-1.0)).is_err());
    }

    #[test]
    fn lambda_default_scales_with_features() {
        let x = SparseMatrix::from_dense(&DenseMatrix::from_fn(2, 4, |_, _| 2.0));
        assert_abs_diff_eq!(default_lambda(&x), 0.01 * 32.0 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            default_lambda(&x.scaled(3.0)),
            9.0 * default_lambda(&x),
            epsilon = 1e-12
        );
    }
}
