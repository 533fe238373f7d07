//! End-to-end training: partition the instances, then learn embeddings and a
//! regressor independently inside every partition.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::cluster::{default_num_clusters, partition_instances};
use crate::config::{Algorithm, HyperParams};
use crate::data::Dataset;
use crate::embed::{
    build_context_pairs, factorize_embeddings, sgns_sgd_embed, split_joint_embeddings,
    EmbeddingMatrix, NegativeDistribution, SgnsConfig,
};
use crate::error::{check_dim, Error, Result};
use crate::hogwild::UpdateMode;
use crate::linalg::{
    gram, label_cooccurrence, CooccurrenceMatrix, DenseMatrix, LabelMatrix, SparseMatrix,
    SvdOptions,
};
use crate::predict::{ClusterPart, TrainedModel};
use crate::regress::{
    default_lambda, joint_sgd_v, solve_ridge, AdmmOptions, JointSgdConfig, Regressor, RidgeSolver,
};
use crate::sppmi::{build_joint_matrix, sparsify_mutual_knn, sppmi, zero_diagonal};

/// Solver and execution settings that do not change the model's meaning.
#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub mode: UpdateMode,
    pub svd: SvdOptions,
    pub admm: AdmmOptions,
    /// Use ADMM even when the closed form is cheap.
    pub force_admm: bool,
    /// Train clusters concurrently.
    pub parallel_clusters: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            mode: UpdateMode::Deterministic,
            svd: SvdOptions::default(),
            admm: AdmmOptions::default(),
            force_admm: false,
            parallel_clusters: true,
        }
    }
}

/// What happened inside one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterLog {
    pub cluster: usize,
    pub members: usize,
    /// Order of the factorized matrix, when there is one.
    pub matrix_order: Option<usize>,
    /// Embedding columns carrying signal; the rest are zero padding.
    pub rank: usize,
    pub lambda: f64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct TrainLog {
    pub clusters: Vec<ClusterLog>,
    pub elapsed: Duration,
}

/// Trains a model on `data`. `correlations` is the `L × L` side information
/// for the joint algorithm; it defaults to the co-occurrence of the training
/// labels.
pub fn train(
    data: &Dataset,
    params: &HyperParams,
    correlations: Option<&CooccurrenceMatrix>,
    opts: &TrainOptions,
) -> Result<(TrainedModel, TrainLog)> {
    let start = Instant::now();
    params.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let x = &data.features;
    let y = &data.labels;
    let num_clusters = params
        .clusters
        .unwrap_or_else(|| default_num_clusters(data.len()));
    let clusters = partition_instances(x, num_clusters, params.cluster_iters, params.seed)
        .map_err(|e| e.in_module("cluster"))?;
    let own_c;
    let c = if params.algo == Algorithm::Exmlds3 {
        match correlations {
            Some(c) => {
                check_dim("label correlation rows", y.num_labels(), c.rows())?;
                check_dim("label correlation cols", y.num_labels(), c.cols())?;
                Some(c)
            }
            None => {
                own_c = label_cooccurrence(y);
                Some(&own_c)
            }
        }
    } else {
        None
    };
    let members = clusters.members();
    let job = |(cid, rows): (usize, &Vec<usize>)| train_cluster(cid, rows, x, y, c, params, opts);
    let results: Vec<Result<(ClusterPart, ClusterLog)>> = if opts.parallel_clusters {
        members.par_iter().enumerate().map(job).collect()
    } else {
        members.iter().enumerate().map(job).collect()
    };
    let mut parts = Vec::with_capacity(results.len());
    let mut logs = Vec::with_capacity(results.len());
    for r in results {
        let (p, l) = r?;
        parts.push(p);
        logs.push(l);
    }
    let mut params = params.clone();
    params.clusters = Some(num_clusters);
    let model = TrainedModel {
        params,
        clusters,
        parts,
        num_features: x.cols(),
        num_labels: y.num_labels(),
    };
    model.validate()?;
    Ok((
        model,
        TrainLog {
            clusters: logs,
            elapsed: start.elapsed(),
        },
    ))
}

/// Trains on all instances as one partition.
pub fn train_single(data: &Dataset, params: &HyperParams) -> Result<TrainedModel> {
    let params = HyperParams {
        clusters: Some(1),
        ..params.clone()
    };
    Ok(train(data, &params, None, &TrainOptions::default())?.0)
}

fn cluster_seed(seed: u64, cluster: usize) -> u64 {
    seed.wrapping_add(cluster as u64)
}

fn train_cluster(
    cid: usize,
    rows: &[usize],
    x: &SparseMatrix,
    y: &LabelMatrix,
    c: Option<&CooccurrenceMatrix>,
    params: &HyperParams,
    opts: &TrainOptions,
) -> Result<(ClusterPart, ClusterLog)> {
    let start = Instant::now();
    let dim = params.dim;
    let xc = x.select_rows(rows);
    let yc = y.select_rows(rows);
    let seed = cluster_seed(params.seed, cid);
    let lambda = params.lambda.unwrap_or_else(|| default_lambda(&xc));
    let mut log = ClusterLog {
        cluster: cid,
        members: rows.len(),
        matrix_order: None,
        rank: 0,
        lambda,
        elapsed: Duration::ZERO,
    };
    if rows.is_empty() {
        log::warn!("cluster {cid} is empty");
        let part = ClusterPart {
            regressor: Regressor {
                v: DenseMatrix::zeros(dim, x.cols()),
                lambda,
                similarity: params.similarity,
            },
            embeddings: DenseMatrix::zeros(0, dim),
            members: Vec::new(),
            labels: LabelMatrix::empty(0, y.num_labels()),
            label_embeddings: c.map(|_| DenseMatrix::zeros(y.num_labels(), dim)),
        };
        return Ok((part, log));
    }
    let svd = SvdOptions {
        seed,
        ..opts.svd.clone()
    };
    let ridge = |z: &EmbeddingMatrix| -> Result<Regressor> {
        let o = AdmmOptions {
            lambda,
            ..opts.admm.clone()
        };
        let solver = if opts.force_admm {
            RidgeSolver::Admm(o)
        } else {
            RidgeSolver::Auto(o)
        };
        let mut r = solve_ridge(&xc, z, &solver).map_err(|e| e.in_module("regress"))?;
        r.similarity = params.similarity;
        Ok(r)
    };
    let mut label_embeddings = None;
    let regressor = match params.algo {
        Algorithm::Exmlds1 | Algorithm::JointSgd => {
            let m = prepared_gram(&yc, params)?;
            log.matrix_order = Some(m.rows());
            let (z, rank) = factorize_padded(&m, params, &svd)?;
            log.rank = rank;
            let r = ridge(&z)?;
            if params.algo == Algorithm::JointSgd {
                let pairs =
                    build_context_pairs(&yc, params.k_context).map_err(|e| e.in_module("embed"))?;
                let cfg = JointSgdConfig {
                    dim,
                    negatives: params.negatives,
                    epochs: params.iterations,
                    eta: params.learning_rate,
                    similarity: params.similarity,
                    seed,
                    negative_distribution: NegativeDistribution::Uniform,
                    mode: opts.mode,
                    track_objective: false,
                };
                let mut fit = joint_sgd_v(&xc, &pairs, &cfg, Some(&r.v))
                    .map_err(|e| e.in_module("regress"))?;
                fit.regressor.lambda = lambda;
                fit.regressor
            } else {
                r
            }
        }
        Algorithm::Exmlds2 => {
            let pairs =
                build_context_pairs(&yc, params.k_context).map_err(|e| e.in_module("embed"))?;
            let cfg = SgnsConfig {
                dim,
                negatives: params.negatives,
                epochs: params.iterations,
                learning_rate: params.learning_rate,
                seed,
                negative_distribution: NegativeDistribution::Unigram,
                mode: opts.mode,
            };
            let z = sgns_sgd_embed(&pairs, &cfg).map_err(|e| e.in_module("embed"))?;
            log.rank = dim;
            ridge(&z)?
        }
        Algorithm::Exmlds3 => {
            let c = c.expect("joint algorithm has correlations");
            let m = prepared_gram(&yc, params)?;
            let a = build_joint_matrix(&m, &yc, c, params.mu).map_err(|e| e.in_module("sppmi"))?;
            log::info!(
                "cluster {cid}: joint matrix {}x{} ({} instances + {} labels)",
                a.rows(),
                a.cols(),
                rows.len(),
                y.num_labels()
            );
            log.matrix_order = Some(a.rows());
            let (z, rank) = factorize_padded(&a, params, &svd)?;
            log.rank = rank;
            let (z1, z2) = split_joint_embeddings(&z, rows.len(), y.num_labels())?;
            label_embeddings = Some(z2);
            ridge(&z1)?
        }
    };
    let embeddings = regressor.embed_all(&xc)?;
    if !embeddings.is_finite() {
        return Err(Error::NonFinite("instance embeddings").in_module("regress"));
    }
    log.elapsed = start.elapsed();
    log::info!(
        "cluster {cid}: {} members, rank {}, lambda {:.4e}, {:.2?}",
        rows.len(),
        log.rank,
        lambda,
        log.elapsed
    );
    Ok((
        ClusterPart {
            regressor,
            embeddings,
            members: rows.to_vec(),
            labels: yc,
            label_embeddings,
        },
        log,
    ))
}

fn prepared_gram(yc: &LabelMatrix, params: &HyperParams) -> Result<CooccurrenceMatrix> {
    let mut m = gram(yc);
    if params.knn_sparsify {
        m = sparsify_mutual_knn(&m, params.k_context).map_err(|e| e.in_module("sppmi"))?;
    }
    if params.zero_diagonal {
        m = zero_diagonal(&m);
    }
    Ok(m)
}

/// SPPMI factorization to `params.dim` columns. When the matrix is smaller
/// than the requested dimension the trailing columns are zero, which leaves
/// every cosine unchanged. Returns the embeddings and the factorized rank.
fn factorize_padded(
    m: &CooccurrenceMatrix,
    params: &HyperParams,
    svd: &SvdOptions,
) -> Result<(EmbeddingMatrix, usize)> {
    let order = m.rows();
    let dim = params.dim;
    if m.total() == 0.0 {
        log::warn!("co-occurrence matrix of order {order} is all zero");
        return Ok((DenseMatrix::zeros(order, dim), 0));
    }
    let s = sppmi(m, params.shift).map_err(|e| e.in_module("sppmi"))?;
    if s.matrix.nnz() == 0 {
        log::warn!(
            "SPPMI matrix of order {order} is all zero at shift {}",
            params.shift
        );
        return Ok((DenseMatrix::zeros(order, dim), 0));
    }
    let rank = dim.min(order);
    let z = factorize_embeddings(&s, rank, svd).map_err(|e| e.in_module("embed"))?;
    if rank == dim {
        return Ok((z, rank));
    }
    log::warn!("embedding dimension {dim} exceeds matrix order {order}; padding with zeros");
    let mut padded = DenseMatrix::zeros(order, dim);
    for i in 0..order {
        padded.row_mut(i)[..rank].copy_from_slice(z.row(i));
    }
    Ok((padded, rank))
}
