//! Label scoring by nearest-neighbor decompression, optionally combined with
//! label-embedding scores, and the ranking metrics used to evaluate it.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::cluster::{ClusterModel, Route};
use crate::config::HyperParams;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, top_k, CosineIndex, DenseMatrix, LabelMatrix, Neighbor, SparseMatrix};
use crate::regress::Regressor;

/// One score per label.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn zeros(num_labels: usize) -> Self {
        ScoreVector(vec![0.0; num_labels])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// The `p` highest scores as `(label, score)`, ties to the lower label.
    /// `p` larger than the label count returns every label.
    pub fn top_p(&self, p: usize) -> Vec<(u32, f64)> {
        let cands = self
            .0
            .iter()
            .enumerate()
            .map(|(index, &similarity)| Neighbor { index, similarity })
            .collect();
        top_k(cands, p)
            .into_iter()
            .map(|n| (n.index as u32, n.similarity))
            .collect()
    }

    pub fn ranking(&self, p: usize) -> Vec<u32> {
        self.top_p(p).into_iter().map(|(l, _)| l).collect()
    }
}

/// Everything a cluster needs at prediction time.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterPart {
    pub regressor: Regressor,
    /// Embeddings of the member instances, one row per member.
    pub embeddings: DenseMatrix,
    /// Global training indices of the members, ascending.
    pub members: Vec<usize>,
    /// Label rows of the members.
    pub labels: LabelMatrix,
    /// `L × d′` label embeddings of joint models.
    pub label_embeddings: Option<DenseMatrix>,
}

impl ClusterPart {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub params: HyperParams,
    pub clusters: ClusterModel,
    pub parts: Vec<ClusterPart>,
    pub num_features: usize,
    pub num_labels: usize,
}

impl TrainedModel {
    pub fn is_joint(&self) -> bool {
        self.params.algo.has_label_embeddings()
    }

    /// Checks every shape invariant. Run after loading from disk.
    pub fn validate(&self) -> Result<()> {
        self.clusters.validate()?;
        check_dim(
            "cluster parts",
            self.clusters.num_clusters(),
            self.parts.len(),
        )?;
        check_dim(
            "centroid features",
            self.num_features,
            self.clusters.num_features(),
        )?;
        let members = self.clusters.members();
        let dim = self.params.dim;
        for (c, part) in self.parts.iter().enumerate() {
            if part.members != members[c] {
                return Err(Error::Format(format!(
                    "cluster {c} members disagree with assignments"
                )));
            }
            check_dim("embedding rows", part.len(), part.embeddings.rows())?;
            check_dim("label rows", part.len(), part.labels.rows())?;
            check_dim("label count", self.num_labels, part.labels.num_labels())?;
            check_dim(
                "regressor features",
                self.num_features,
                part.regressor.v.cols(),
            )?;
            if !part.is_empty() {
                check_dim("embedding dimension", dim, part.embeddings.cols())?;
                check_dim("regressor dimension", dim, part.regressor.v.rows())?;
            }
            match (&part.label_embeddings, self.is_joint()) {
                (Some(z2), true) => {
                    check_dim("label embedding rows", self.num_labels, z2.rows())?;
                    check_dim(
                        "label embedding dimension",
                        part.regressor.v.rows(),
                        z2.cols(),
                    )?;
                }
                (None, false) => {}
                (Some(_), false) => {
                    return Err(Error::Format(format!(
                        "{} model carries label embeddings",
                        self.params.algo
                    )))
                }
                (None, true) => {
                    return Err(Error::Format(format!(
                        "joint model is missing label embeddings in cluster {c}"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Mean label vector of the `k` member embeddings closest to `z` by cosine.
pub fn knn_score(z: &[f64], part: &ClusterPart, k: usize, num_labels: usize) -> ScoreVector {
    knn_score_indexed(z, &CosineIndex::new(&part.embeddings), part, k, num_labels)
}

fn knn_score_indexed(
    z: &[f64],
    index: &CosineIndex<'_>,
    part: &ClusterPart,
    k: usize,
    num_labels: usize,
) -> ScoreVector {
    let mut s = ScoreVector::zeros(num_labels);
    let nn = index.search(z, k, None);
    if nn.is_empty() {
        return s;
    }
    for n in &nn {
        for &l in part.labels.row(n.index) {
            s.0[l as usize] += 1.0;
        }
    }
    let count = nn.len() as f64;
    s.0.iter_mut().for_each(|v| *v /= count);
    s
}

/// `s₁/‖s₁‖ + s₂/‖s₂‖`; a zero component contributes nothing.
pub fn combine_scores(s1: &ScoreVector, s2: &ScoreVector) -> ScoreVector {
    let (n1, n2) = (s1.norm(), s2.norm());
    let w1 = if n1 > 0.0 { 1.0 / n1 } else { 0.0 };
    let w2 = if n2 > 0.0 { 1.0 / n2 } else { 0.0 };
    ScoreVector(
        s1.0.iter()
            .zip(&s2.0)
            .map(|(a, b)| a * w1 + b * w2)
            .collect(),
    )
}

/// Scores for one query along with where it was routed.
#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub route: Route,
    pub scores: ScoreVector,
}

/// Read-only view of a model with per-cluster search structures built once.
pub struct Predictor<'m> {
    model: &'m TrainedModel,
    indexes: Vec<CosineIndex<'m>>,
    k: usize,
}

impl<'m> Predictor<'m> {
    pub fn new(model: &'m TrainedModel) -> Self {
        let indexes = model
            .parts
            .iter()
            .map(|p| CosineIndex::new(&p.embeddings))
            .collect();
        Predictor {
            model,
            indexes,
            k: model.params.k_predict,
        }
    }

    /// Overrides the neighbor count.
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn model(&self) -> &TrainedModel {
        self.model
    }

    /// Kernel-decompression scores (`s₁`) for a sparse query.
    pub fn knn_scores(&self, x: impl Iterator<Item = (usize, f64)> + Clone) -> Scored {
        let (route, z) = self.embed(x);
        let part = &self.model.parts[route.cluster];
        let scores = knn_score_indexed(
            &z,
            &self.indexes[route.cluster],
            part,
            self.k,
            self.model.num_labels,
        );
        Scored { route, scores }
    }

    /// Scores according to the model kind: kNN only, or kNN combined with
    /// label-embedding scores for joint models.
    pub fn scores(&self, x: impl Iterator<Item = (usize, f64)> + Clone) -> Scored {
        let (route, z) = self.embed(x);
        let part = &self.model.parts[route.cluster];
        let s1 = knn_score_indexed(
            &z,
            &self.indexes[route.cluster],
            part,
            self.k,
            self.model.num_labels,
        );
        let scores = match &part.label_embeddings {
            Some(z2) => combine_scores(&s1, &label_embedding_scores(z2, &z)),
            None => s1,
        };
        Scored { route, scores }
    }

    pub fn scores_row(&self, x: &SparseMatrix, i: usize) -> Scored {
        self.scores(x.row_entries(i))
    }

    fn embed(&self, x: impl Iterator<Item = (usize, f64)> + Clone) -> (Route, Vec<f64>) {
        let route = self.model.clusters.assign_sparse(x.clone());
        let part = &self.model.parts[route.cluster];
        if part.is_empty() {
            log::warn!("query routed to empty cluster {}", route.cluster);
        }
        (route, part.regressor.embed_sparse(x))
    }
}

/// `s₂ = Z₂ z`.
pub fn label_embedding_scores(z2: &DenseMatrix, z: &[f64]) -> ScoreVector {
    ScoreVector(z2.row_iter().map(|r| crate::linalg::dot(r, z)).collect())
}

fn check_query(model: &TrainedModel, x: &[(usize, f64)]) -> Result<()> {
    if let Some(&(f, _)) = x.iter().find(|&&(f, _)| f >= model.num_features) {
        return Err(Error::DimensionMismatch {
            context: "query feature index",
            expected: model.num_features,
            actual: f + 1,
        });
    }
    Ok(())
}

/// Top `p` labels by kNN decompression alone.
pub fn predict_top_p(
    x: &[(usize, f64)],
    model: &TrainedModel,
    k: usize,
    p: usize,
) -> Result<Vec<u32>> {
    check_query(model, x)?;
    let pred = Predictor::new(model).with_k(k);
    Ok(pred.knn_scores(x.iter().copied()).scores.ranking(p))
}

/// Top `p` labels of a joint model, combining kNN and label-embedding scores.
pub fn predict_joint(
    x: &[(usize, f64)],
    model: &TrainedModel,
    k: usize,
    p: usize,
) -> Result<Vec<u32>> {
    check_query(model, x)?;
    if !model.is_joint() {
        return Err(Error::invalid(format!(
            "{} model has no label embeddings",
            model.params.algo
        )));
    }
    let pred = Predictor::new(model).with_k(k);
    Ok(pred.scores(x.iter().copied()).scores.ranking(p))
}

fn hit(truth: &[u32], label: u32) -> bool {
    truth.binary_search(&label).is_ok()
}

/// Correct labels among the first `k` ranked, divided by `k`. `truth` must be
/// sorted.
pub fn precision_at_k(ranked: &[u32], truth: &[u32], k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    let hits = ranked.iter().take(k).filter(|&&l| hit(truth, l)).count();
    hits as f64 / k as f64
}

/// Binary-relevance nDCG@k with the ideal DCG over `min(k, |truth|)`
/// positions. `truth` must be sorted.
pub fn ndcg_at_k(ranked: &[u32], truth: &[u32], k: usize) -> f64 {
    assert!(k >= 1, "k must be >= 1");
    if truth.is_empty() {
        return 0.0;
    }
    let discount = |r: usize| 1.0 / ((r + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|&(_, &l)| hit(truth, l))
        .map(|(r, _)| discount(r))
        .sum();
    let ideal: f64 = (0..k.min(truth.len())).map(discount).sum();
    dcg / ideal
}

/// Cut-offs reported by [`evaluate`].
pub const REPORT_KS: [usize; 3] = [1, 3, 5];

/// Metrics averaged over test points, as fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub points: usize,
    pub precision: [f64; 3],
    pub ndcg: [f64; 3],
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "points\t{}", self.points)?;
        writeln!(f, "metric\t@1\t@3\t@5")?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, v: &[f64; 3]| {
            writeln!(
                f,
                "{name}\t{:.2}\t{:.2}\t{:.2}",
                100.0 * v[0],
                100.0 * v[1],
                100.0 * v[2]
            )
        };
        row(f, "P", &self.precision)?;
        row(f, "nDCG", &self.ndcg)
    }
}

/// Top labels of one point with their scores, best first.
pub type Ranking = Vec<(u32, f64)>;

/// Rankings (top `p`, with scores) for every row of `x`.
pub fn predict_batch(pred: &Predictor<'_>, x: &SparseMatrix, p: usize) -> Result<Vec<Ranking>> {
    check_dim("test features", pred.model().num_features, x.cols())?;
    Ok((0..x.rows())
        .into_par_iter()
        .map(|i| pred.scores_row(x, i).scores.top_p(p))
        .collect())
}

/// P@{1,3,5} and nDCG@{1,3,5} over all rows, empty truths counting as 0.
/// Also returns each point's ranking.
pub fn evaluate(
    pred: &Predictor<'_>,
    x: &SparseMatrix,
    truth: &LabelMatrix,
) -> Result<(EvalReport, Vec<Ranking>)> {
    check_dim("test rows", x.rows(), truth.rows())?;
    check_dim("test labels", pred.model().num_labels, truth.num_labels())?;
    if x.rows() == 0 {
        return Err(Error::invalid("no test points to evaluate"));
    }
    let depth = pred.model().params.top_p.max(REPORT_KS[2]);
    let ranked = predict_batch(pred, x, depth)?;
    let per_point: Vec<[f64; 6]> = ranked
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let labels: Vec<u32> = r.iter().map(|&(l, _)| l).collect();
            let t = truth.row(i);
            let mut m = [0.0; 6];
            for (j, &k) in REPORT_KS.iter().enumerate() {
                m[j] = precision_at_k(&labels, t, k);
                m[3 + j] = ndcg_at_k(&labels, t, k);
            }
            m
        })
        .collect();
    // fixed-order reduction
    let mut sums = [0.0; 6];
    for m in &per_point {
        for (s, v) in sums.iter_mut().zip(m) {
            *s += v;
        }
    }
    let n = x.rows() as f64;
    let report = EvalReport {
        points: x.rows(),
        precision: [sums[0] / n, sums[1] / n, sums[2] / n],
        ndcg: [sums[3] / n, sums[4] / n, sums[5] / n],
    };
    Ok((report, ranked))
}

/// Tab-separated `point label score` lines, scores printed so that they parse
/// back to the same bits.
pub fn write_score_dump(mut out: impl Write, ranked: &[Ranking]) -> Result<()> {
    for (i, r) in ranked.iter().enumerate() {
        for &(l, s) in r {
            writeln!(out, "{i}\t{l}\t{s}")?;
        }
    }
    Ok(())
}
