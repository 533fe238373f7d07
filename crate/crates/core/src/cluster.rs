//! Spherical k-means over instance features, and routing of queries to the
//! closest partition.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, DenseMatrix, SparseMatrix};

/// Datasets smaller than this train a single partition by default.
pub const SINGLE_CLUSTER_LIMIT: usize = 20_000;
/// Target partition size for larger datasets.
pub const INSTANCES_PER_CLUSTER: usize = 6_000;

pub fn default_num_clusters(n: usize) -> usize {
    if n < SINGLE_CLUSTER_LIMIT {
        1
    } else {
        n.div_ceil(INSTANCES_PER_CLUSTER)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel {
    /// One unit-norm row per cluster; all-zero when the cluster saw no
    /// nonzero instance.
    pub centroids: DenseMatrix,
    pub assignments: Vec<usize>,
}

/// Result of routing a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Route {
    pub cluster: usize,
    /// Set when the query had no direction (zero vector) and fell back to
    /// cluster 0.
    pub degenerate: bool,
}

impl ClusterModel {
    /// Everything in a single partition.
    pub fn single(x: &SparseMatrix) -> Self {
        let mut c = DenseMatrix::zeros(1, x.cols());
        accumulate_unit(x, 0..x.rows(), c.row_mut(0));
        normalize(c.row_mut(0));
        ClusterModel {
            centroids: c,
            assignments: vec![0; x.rows()],
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.centroids.rows()
    }

    pub fn num_features(&self) -> usize {
        self.centroids.cols()
    }

    /// Instance indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.num_clusters()];
        for (i, &c) in self.assignments.iter().enumerate() {
            m[c].push(i);
        }
        m
    }

    /// Clusters whose centroid is the zero vector.
    pub fn empty_flags(&self) -> Vec<bool> {
        self.centroids
            .row_iter()
            .map(|r| r.iter().all(|&v| v == 0.0))
            .collect()
    }

    /// Checks that assignments and centroids agree in shape.
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters() == 0 {
            return Err(Error::invalid("cluster model has no clusters"));
        }
        if let Some(&c) = self.assignments.iter().find(|&&c| c >= self.num_clusters()) {
            return Err(Error::invalid(format!(
                "assignment {c} out of range for {} clusters",
                self.num_clusters()
            )));
        }
        Ok(())
    }

    /// Max-cosine centroid for a sparse query; ties go to the lower index.
    pub fn assign_sparse(&self, x: impl Iterator<Item = (usize, f64)> + Clone) -> Route {
        let nx: f64 = x.clone().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || self.num_clusters() == 1 {
            return Route {
                cluster: 0,
                degenerate: nx == 0.0,
            };
        }
        let sims = (0..self.num_clusters()).map(|c| {
            let row = self.centroids.row(c);
            x.clone().map(|(f, v)| row[f] * v).sum::<f64>()
        });
        Route {
            cluster: argmax(sims),
            degenerate: false,
        }
    }

    /// Same as [`assign_sparse`](Self::assign_sparse) for a dense query.
    pub fn assign_dense(&self, x: &[f64]) -> Result<Route> {
        check_dim("query features", self.num_features(), x.len())?;
        Ok(self.assign_sparse(x.iter().copied().enumerate().filter(|&(_, v)| v != 0.0)))
    }

    /// Routes row `i` of `x`.
    pub fn assign_row(&self, x: &SparseMatrix, i: usize) -> Route {
        self.assign_sparse(x.row_entries(i))
    }
}

/// Cosine of every instance with its assigned centroid, summed.
pub fn spherical_objective(x: &SparseMatrix, model: &ClusterModel) -> f64 {
    (0..x.rows())
        .map(|i| {
            let n = x.row_norm(i);
            if n == 0.0 {
                0.0
            } else {
                x.row_dot(i, model.centroids.row(model.assignments[i])) / n
            }
        })
        .sum()
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, s) in values.enumerate() {
        if s > best.1 {
            best = (c, s);
        }
    }
    best.0
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|e| *e /= n);
    }
}

fn accumulate_unit(x: &SparseMatrix, rows: impl Iterator<Item = usize>, out: &mut [f64]) {
    for i in rows {
        let n = x.row_norm(i);
        if n > 0.0 {
            for (f, v) in x.row_entries(i) {
                out[f] += v / n;
            }
        }
    }
}

fn unit_row(x: &SparseMatrix, i: usize) -> Vec<f64> {
    let mut c = vec![0.0; x.cols()];
    accumulate_unit(x, std::iter::once(i), &mut c);
    c
}

/// Spherical k-means with k-means++ seeding.
pub fn partition_instances(
    x: &SparseMatrix,
    num_clusters: usize,
    max_iters: usize,
    seed: u64,
) -> Result<ClusterModel> {
    Ok(partition_instances_traced(x, num_clusters, max_iters, seed)?.0)
}

/// As [`partition_instances`], also returning the objective after every
/// centroid update.
pub fn partition_instances_traced(
    x: &SparseMatrix,
    num_clusters: usize,
    max_iters: usize,
    seed: u64,
) -> Result<(ClusterModel, Vec<f64>)> {
    let n = x.rows();
    if num_clusters == 0 {
        return Err(Error::invalid("number of clusters must be >= 1"));
    }
    if num_clusters > n {
        return Err(Error::invalid(format!(
            "{num_clusters} clusters requested for {n} instances"
        )));
    }
    if num_clusters == 1 {
        let m = ClusterModel::single(x);
        let obj = spherical_objective(x, &m);
        return Ok((m, vec![obj]));
    }
    let norms: Vec<f64> = (0..n).map(|i| x.row_norm(i)).collect();
    let mut centroids = seed_centroids(x, &norms, num_clusters, seed);
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    for iter in 0..max_iters.max(1) {
        let next: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| {
                if norms[i] == 0.0 {
                    0
                } else {
                    argmax(centroids.row_iter().map(|c| x.row_dot(i, c)))
                }
            })
            .collect();
        let mut changed = next != assignments;
        assignments = next;
        changed |= repair_empty(x, &norms, &mut centroids, &mut assignments);
        if !changed {
            break;
        }
        let mut updated = DenseMatrix::zeros(num_clusters, x.cols());
        let members = members_of(&assignments, num_clusters);
        for (c, rows) in members.iter().enumerate() {
            let row = updated.row_mut(c);
            accumulate_unit(x, rows.iter().copied(), row);
            normalize(row);
            if row.iter().all(|&v| v == 0.0) {
                row.copy_from_slice(centroids.row(c));
            }
        }
        centroids = updated;
        let model = ClusterModel {
            centroids: centroids.clone(),
            assignments: assignments.clone(),
        };
        let obj = spherical_objective(x, &model);
        log::debug!("k-means iteration {iter}: objective {obj:.6}");
        history.push(obj);
    }
    Ok((
        ClusterModel {
            centroids,
            assignments,
        },
        history,
    ))
}

fn members_of(assignments: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); k];
    for (i, &c) in assignments.iter().enumerate() {
        m[c].push(i);
    }
    m
}

fn seed_centroids(x: &SparseMatrix, norms: &[f64], k: usize, seed: u64) -> DenseMatrix {
    let n = x.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    // highest cosine to any chosen centre so far
    let mut best = vec![f64::NEG_INFINITY; n];
    for _ in 0..k {
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                if norms[i] == 0.0 || chosen.contains(&i) {
                    0.0
                } else if chosen.is_empty() {
                    1.0
                } else {
                    (1.0 - best[i]).max(0.0)
                }
            })
            .collect();
        let pick = match WeightedIndex::new(&weights) {
            Ok(w) => w.sample(&mut rng),
            // nothing left with a new direction
            Err(_) => (0..n).find(|i| !chosen.contains(i)).expect("k <= n"),
        };
        chosen.push(pick);
        let c = unit_row(x, pick);
        for i in 0..n {
            if norms[i] > 0.0 {
                best[i] = best[i].max(x.row_dot(i, &c) / norms[i]);
            }
        }
    }
    let mut centroids = DenseMatrix::zeros(k, x.cols());
    for (c, &i) in chosen.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(&unit_row(x, i));
    }
    centroids
}

/// Gives every empty cluster the worst-fitting member of the currently
/// largest cluster. Returns whether anything moved.
fn repair_empty(
    x: &SparseMatrix,
    norms: &[f64],
    centroids: &mut DenseMatrix,
    assignments: &mut [usize],
) -> bool {
    let k = centroids.rows();
    let mut moved = false;
    loop {
        let mut sizes = vec![0usize; k];
        for &c in assignments.iter() {
            sizes[c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return moved;
        };
        let largest = argmax(sizes.iter().map(|&s| s as f64));
        if sizes[largest] < 2 {
            return moved;
        }
        let cen = centroids.row(largest).to_vec();
        let fit = |i: usize| {
            if norms[i] == 0.0 {
                f64::NEG_INFINITY
            } else {
                x.row_dot(i, &cen) / norms[i]
            }
        };
        // lowest cosine; zero rows never move since they cannot define a
        // direction
        let mut worst: Option<(usize, f64)> = None;
        for i in (0..assignments.len()).filter(|&i| assignments[i] == largest) {
            let f = fit(i);
            if f.is_finite() && worst.is_none_or(|(_, w)| f < w) {
                worst = Some((i, f));
            }
        }
        let Some((i, _)) = worst else {
            return moved;
        };
        assignments[i] = empty;
        centroids.row_mut(empty).copy_from_slice(&unit_row(x, i));
        moved = true;
    }
}
