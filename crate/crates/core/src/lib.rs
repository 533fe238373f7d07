//! Extreme multi-label learning with distributional-semantics label
//! embeddings.
//!
//! Instances are embedded so that those with similar label vectors end up
//! close together: either by factorizing the shifted positive PMI matrix of
//! the label gram matrix, or by skip-gram negative sampling over label-space
//! neighbors. A linear map from features to embeddings is then fit, and a
//! query is labeled by averaging the label vectors of its nearest training
//! instances in embedding space.
//!
//! ```no_run
//! use exmlds::{read_xmlc_file, train, HyperParams, Predictor, TrainOptions};
//!
//! let data = read_xmlc_file("bibtex_train.txt")?;
//! let (model, _) = train(&data, &HyperParams::default(), None, &TrainOptions::default())?;
//! let pred = Predictor::new(&model);
//! let top = pred.scores_row(&data.features, 0).scores.top_p(5);
//! # Ok::<(), exmlds::Error>(())
//! ```

// `!(x >= 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod config;
pub mod data;
pub mod embed;
pub mod error;
pub mod hogwild;
pub mod linalg;
pub mod model;
pub mod predict;
pub mod regress;
pub mod sppmi;
pub mod train;

pub use cluster::{partition_instances, ClusterModel};
pub use config::{Algorithm, HyperParams};
pub use data::{mask_labels, read_xmlc_file, write_xmlc_dataset, Dataset, MaskResult};
pub use embed::{EmbeddingMatrix, Similarity};
pub use error::{Error, Result};
pub use hogwild::UpdateMode;
pub use linalg::{CooccurrenceMatrix, DenseMatrix, LabelMatrix, SparseMatrix};
pub use model::{load_model, save_model};
pub use predict::{evaluate, EvalReport, Predictor, ScoreVector, TrainedModel};
pub use regress::Regressor;
pub use sppmi::JointWeights;
pub use train::{train, TrainLog, TrainOptions};
