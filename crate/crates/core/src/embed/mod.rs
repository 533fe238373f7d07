//! Instance and label embeddings: truncated factorization of an SPPMI matrix,
//! or SGNS stochastic optimization over label-space context pairs.

mod pairs;
mod sgns;

pub use pairs::{build_context_pairs, ContextPairs};
pub use sgns::{
    init_embeddings, log_sigmoid, sgns_objective, sgns_objective_with, sgns_sgd_embed,
    sgns_sgd_train, sigmoid, NegativeDistribution, SgnsConfig, Similarity,
};

use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, DenseMatrix, SvdOptions};
use crate::sppmi::SppmiMatrix;

/// One embedding per row.
pub type EmbeddingMatrix = DenseMatrix;

/// `Z = U·diag(S)^½` from the top `dim` singular triplets.
///
/// Singular vectors are sign-normalized (largest-magnitude coordinate
/// positive), so the result is deterministic.
pub fn factorize_embeddings(
    s: &SppmiMatrix,
    dim: usize,
    opts: &SvdOptions,
) -> Result<EmbeddingMatrix> {
    if dim == 0 || dim > s.dim() {
        return Err(Error::invalid(format!(
            "embedding dimension {dim} outside 1..={}",
            s.dim()
        )));
    }
    let svd = truncated_svd(&s.matrix, dim, opts)?;
    let mut z = svd.u;
    for i in 0..z.rows() {
        for (j, sv) in svd.s.iter().enumerate() {
            z.set(i, j, z.get(i, j) * sv.sqrt());
        }
    }
    Ok(z)
}

/// Instance rows (first `n`) and label rows (last `num_labels`) of a joint
/// embedding.
pub fn split_joint_embeddings(
    z: &EmbeddingMatrix,
    n: usize,
    num_labels: usize,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    crate::error::check_dim("joint embedding rows", n + num_labels, z.rows())?;
    z.split_rows(n)
}
