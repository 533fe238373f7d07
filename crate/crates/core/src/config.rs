use std::fmt;
use std::str::FromStr;

use crate::embed::Similarity;
use crate::error::{Error, Result};
use crate::sppmi::JointWeights;

/// Training pipeline variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Gram matrix, SPPMI, truncated SVD, ridge regression.
    #[default]
    Exmlds1,
    /// kNN context pairs, SGNS by SGD, ridge regression.
    Exmlds2,
    /// Joint instance and label factorization with label correlations.
    Exmlds3,
    /// Exmlds1 warm start followed by SGD on the regressor itself.
    JointSgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Exmlds1,
        Algorithm::Exmlds2,
        Algorithm::Exmlds3,
        Algorithm::JointSgd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Exmlds1 => "exmlds1",
            Algorithm::Exmlds2 => "exmlds2",
            Algorithm::Exmlds3 => "exmlds3",
            Algorithm::JointSgd => "joint-sgd",
        }
    }

    /// Whether models of this kind carry label embeddings.
    pub fn has_label_embeddings(self) -> bool {
        self == Algorithm::Exmlds3
    }

    pub(crate) fn code(self) -> i64 {
        Algorithm::ALL.iter().position(|&a| a == self).unwrap() as i64
    }

    pub(crate) fn from_code(c: i64) -> Result<Self> {
        usize::try_from(c)
            .ok()
            .and_then(|c| Algorithm::ALL.get(c).copied())
            .ok_or_else(|| Error::Format(format!("unknown algorithm code {c}")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm '{s}'")))
    }
}

/// Everything that shapes a trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    pub algo: Algorithm,
    /// Embedding dimension d′.
    pub dim: usize,
    /// Neighbors per instance when building context pairs, and for the
    /// optional mutual-kNN sparsification of the gram matrix.
    pub k_context: usize,
    /// Neighbors averaged at prediction time.
    pub k_predict: usize,
    /// Labels returned per query.
    pub top_p: usize,
    pub negatives: usize,
    /// `k` in the `log k` shift of SPPMI.
    pub shift: f64,
    pub mu: JointWeights,
    /// Ridge weight; `None` picks a data-scaled default per cluster.
    pub lambda: Option<f64>,
    /// Partitions; `None` picks a default from the instance count.
    pub clusters: Option<usize>,
    pub cluster_iters: usize,
    /// SGD epochs.
    pub iterations: usize,
    pub learning_rate: f64,
    pub similarity: Similarity,
    pub seed: u64,
    /// Restrict the gram matrix to mutual top-`k_context` neighbors.
    pub knn_sparsify: bool,
    /// Zero the gram diagonal before PMI.
    pub zero_diagonal: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            algo: Algorithm::Exmlds1,
            dim: 100,
            k_context: 10,
            k_predict: 10,
            top_p: 5,
            negatives: 15,
            shift: 15.0,
            mu: JointWeights {
                mu1: 4.0,
                mu2: 1.0,
                mu3: 1.0,
            },
            lambda: None,
            clusters: None,
            cluster_iters: 20,
            iterations: 35,
            learning_rate: SGNS_LEARNING_RATE,
            similarity: Similarity::Dot,
            seed: 42,
            knn_sparsify: false,
            zero_diagonal: false,
        }
    }
}

/// Starting rate for SGNS on embeddings.
pub const SGNS_LEARNING_RATE: f64 = 0.025;
/// Constant step for SGD on the regressor. Gradients there scale with the
/// squared feature norm, so the embedding rate diverges on typical inputs.
pub const JOINT_SGD_LEARNING_RATE: f64 = 5e-4;

impl HyperParams {
    /// Defaults with the learning rate suited to `algo`.
    pub fn for_algorithm(algo: Algorithm) -> Self {
        HyperParams {
            algo,
            learning_rate: match algo {
                Algorithm::JointSgd => JOINT_SGD_LEARNING_RATE,
                _ => SGNS_LEARNING_RATE,
            },
            ..HyperParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim", self.dim),
            ("k_context", self.k_context),
            ("k_predict", self.k_predict),
            ("top_p", self.top_p),
            ("negatives", self.negatives),
            ("iterations", self.iterations),
            ("cluster_iters", self.cluster_iters),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be >= 1")));
            }
        }
        if self.clusters == Some(0) {
            return Err(Error::invalid("clusters must be >= 1"));
        }
        if !(self.shift >= 1.0) {
            return Err(Error::invalid(format!(
                "shift must be >= 1, got {}",
                self.shift
            )));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::invalid(format!(
                    "lambda must be finite and >= 0, got {l}"
                )));
            }
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.algo == Algorithm::Exmlds3 {
            self.mu.validate()?;
        }
        Ok(())
    }
}
