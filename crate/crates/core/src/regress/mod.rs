//! Linear maps from features to embeddings, `g(x) = V x`.

mod grad;
mod joint;
mod ridge;

pub use grad::{embed_row, gradient_v_cosine, gradient_v_dot, COSINE_EPS};
pub use joint::{init_regressor, joint_objective, joint_sgd_v, JointSgdConfig, JointSgdFit};
pub use ridge::{
    admm_ridge, default_lambda, direct_ridge, ridge_objective, solve_ridge, AdmmFit, AdmmOptions,
    RidgeSolver,
};

use crate::embed::{EmbeddingMatrix, Similarity};
use crate::error::Result;
use crate::linalg::{DenseMatrix, SparseMatrix};

/// `V ∈ R^{d′×d}` together with how it was fit.
#[derive(Clone, Debug, PartialEq)]
pub struct Regressor {
    pub v: DenseMatrix,
    pub lambda: f64,
    pub similarity: Similarity,
}

impl Regressor {
    pub fn dim(&self) -> usize {
        self.v.rows()
    }

    pub fn num_features(&self) -> usize {
        self.v.cols()
    }

    /// `V x` for a sparse feature vector given as `(index, value)` entries.
    pub fn embed_sparse(&self, x: impl IntoIterator<Item = (usize, f64)> + Clone) -> Vec<f64> {
        (0..self.v.rows())
            .map(|r| {
                let row = self.v.row(r);
                x.clone().into_iter().map(|(f, xv)| row[f] * xv).sum()
            })
            .collect()
    }

    /// Embeds every row of `x`: `X Vᵀ`.
    pub fn embed_all(&self, x: &SparseMatrix) -> Result<EmbeddingMatrix> {
        x.mul_dense(&self.v.transpose())
    }
}
