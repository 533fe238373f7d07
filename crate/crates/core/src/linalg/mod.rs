//! Sparse and dense matrix primitives: gram products, truncated SVD and exact
//! cosine nearest-neighbor search.

mod dense;
mod gram;
mod knn;
mod sparse;
mod svd;

pub use dense::{axpy, dot, norm, DenseMatrix};
pub use gram::{gram, label_cooccurrence};
pub(crate) use knn::top_k;
pub use knn::{cosine, cosine_knn, CosineIndex, Neighbor};
pub(crate) use sparse::SparseBuilder;
pub use sparse::{CooccurrenceMatrix, LabelMatrix, SparseMatrix};
pub use svd::{truncated_svd, LinearOperator, SvdOptions, TruncatedSvd};
