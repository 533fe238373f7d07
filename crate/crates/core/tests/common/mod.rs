//! Reference implementations written as plainly as possible, sharing no code
//! with the library beyond its data types.
#![allow(dead_code, clippy::needless_range_loop)]

use exmlds::{DenseMatrix, LabelMatrix, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_counts(rng: &mut ChaCha8Rng, n: usize, max: u32, symmetric: bool) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if symmetric && j < i {
                m[i][j] = m[j][i];
            } else {
                m[i][j] = rng.random_range(0..=max) as f64;
            }
        }
    }
    m
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, l: usize, density: f64) -> LabelMatrix {
    let rows = (0..n)
        .map(|_| {
            (0..l as u32)
                .filter(|_| rng.random::<f64>() < density)
                .collect()
        })
        .collect();
    LabelMatrix::from_rows(l, rows).unwrap()
}

pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, d: usize, density: f64) -> SparseMatrix {
    let dense = DenseMatrix::from_fn(n, d, |_, _| {
        if rng.random::<f64>() < density {
            rng.random_range(0.1..2.0)
        } else {
            0.0
        }
    });
    SparseMatrix::from_dense(&dense)
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.to_vec()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_rows(rows.first().map_or(0, |r| r.len()), rows).unwrap()
}

/// `max(log(M_ij |M| / (r_i c_j)) − log k, 0)` with undefined entries as 0.
pub fn sppmi_loop(m: &[Vec<f64>], k: f64) -> Vec<Vec<f64>> {
    let n = m.len();
    let cols = m[0].len();
    let mut total = 0.0;
    let mut r = vec![0.0; n];
    let mut c = vec![0.0; cols];
    for i in 0..n {
        for j in 0..cols {
            total += m[i][j];
            r[i] += m[i][j];
            c[j] += m[i][j];
        }
    }
    let mut out = vec![vec![0.0; cols]; n];
    for i in 0..n {
        for j in 0..cols {
            if m[i][j] > 0.0 && r[i] > 0.0 && c[j] > 0.0 {
                let pmi = (m[i][j] * total / (r[i] * c[j])).ln();
                out[i][j] = (pmi - k.ln()).max(0.0);
            }
        }
    }
    out
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and eigenvectors as columns.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        for r in col + 1..n {
            let f = aug[r][col] / aug[col][col];
            for c in col..n + m {
                aug[r][c] -= f * aug[col][c];
            }
        }
    }
    let mut x = vec![vec![0.0; m]; n];
    for r in (0..n).rev() {
        for c in 0..m {
            let mut s = aug[r][n + c];
            for k in r + 1..n {
                s -= aug[r][k] * x[k][c];
            }
            x[r][c] = s / aug[r][r];
        }
    }
    x
}

/// Ridge solution `(XᵀX + λI)⁻¹ XᵀZ`, transposed to `d′ × d`.
pub fn ridge_closed_form(x: &[Vec<f64>], z: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    let d = x[0].len();
    let k = z[0].len();
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xtz = vec![vec![0.0; k]; d];
    for (xi, zi) in x.iter().zip(z) {
        for a in 0..d {
            for b in 0..d {
                xtx[a][b] += xi[a] * xi[b];
            }
            for c in 0..k {
                xtz[a][c] += xi[a] * zi[c];
            }
        }
    }
    for (a, row) in xtx.iter_mut().enumerate() {
        row[a] += lambda;
    }
    let w = gauss_solve(&xtx, &xtz);
    (0..k).map(|c| (0..d).map(|a| w[a][c]).collect()).collect()
}

pub fn frob(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn frob_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn precision_brute(ranked: &[u32], truth: &[u32], k: usize) -> f64 {
    let mut hits = 0;
    for (r, l) in ranked.iter().enumerate() {
        if r < k && truth.contains(l) {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

pub fn ndcg_brute(ranked: &[u32], truth: &[u32], k: usize) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let mut dcg = 0.0;
    for r in 1..=k.min(ranked.len()) {
        if truth.contains(&ranked[r - 1]) {
            dcg += 1.0 / ((r + 1) as f64).log2();
        }
    }
    let mut idcg = 0.0;
    for r in 1..=k.min(truth.len()) {
        idcg += 1.0 / ((r + 1) as f64).log2();
    }
    dcg / idcg
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        d / (na * nb)
    }
}

/// Indices of the `k` rows most cosine-similar to `q`, by full sort.
pub fn knn_brute(
    q: &[f64],
    rows: &[Vec<f64>],
    k: usize,
    exclude: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, r)| (i, cos(q, r)))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Top `p` labels by descending score, ties to the lower label.
pub fn rank_labels(scores: &[f64], p: usize) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx.into_iter().take(p).map(|i| i as u32).collect()
}

/// The single-partition training and prediction pipeline, step by step:
/// gram, SPPMI, eigen-based factorization, closed-form ridge, regressed
/// corpus, cosine kNN, neighbor label averaging.
pub struct StraightLine {
    pub v: Vec<Vec<f64>>,
    pub corpus: Vec<Vec<f64>>,
    pub labels: Vec<Vec<u32>>,
    pub num_labels: usize,
    pub k: usize,
}

impl StraightLine {
    pub fn train(
        x: &[Vec<f64>],
        labels: &[Vec<u32>],
        num_labels: usize,
        dim: usize,
        shift: f64,
        lambda: f64,
        k: usize,
    ) -> Self {
        let n = x.len();
        let mut y = vec![vec![0.0; num_labels]; n];
        for (i, ls) in labels.iter().enumerate() {
            for &l in ls {
                y[i][l as usize] = 1.0;
            }
        }
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = (0..num_labels).map(|l| y[i][l] * y[j][l]).sum();
            }
        }
        let s = sppmi_loop(&m, shift);
        let (vals, vecs) = jacobi_eigen(&s);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vals[b].abs().partial_cmp(&vals[a].abs()).unwrap());
        let z: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                order[..dim]
                    .iter()
                    .map(|&c| vecs[i][c] * vals[c].abs().sqrt())
                    .collect()
            })
            .collect();
        let v = ridge_closed_form(x, &z, lambda);
        let corpus = x
            .iter()
            .map(|xi| {
                v.iter()
                    .map(|vr| vr.iter().zip(xi).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        StraightLine {
            v,
            corpus,
            labels: labels.to_vec(),
            num_labels,
            k,
        }
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = self
            .v
            .iter()
            .map(|vr| vr.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        let nn = knn_brute(&z, &self.corpus, self.k, None);
        let mut s = vec![0.0; self.num_labels];
        for &(i, _) in &nn {
            for &l in &self.labels[i] {
                s[l as usize] += 1.0;
            }
        }
        s.iter().map(|v| v / nn.len() as f64).collect()
    }
}

/// Central finite difference of `f` with respect to every entry of `v`.
pub fn finite_difference(v: &DenseMatrix, h: f64, f: impl Fn(&DenseMatrix) -> f64) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(v.rows(), v.cols());
    let mut w = v.clone();
    for r in 0..v.rows() {
        for c in 0..v.cols() {
            let orig = v.get(r, c);
            w.set(r, c, orig + h);
            let up = f(&w);
            w.set(r, c, orig - h);
            let down = f(&w);
            w.set(r, c, orig);
            g.set(r, c, (up - down) / (2.0 * h));
        }
    }
    g
}

pub fn dense_counts(m: &[Vec<f64>]) -> SparseMatrix {
    SparseMatrix::from_dense(&from_rows(m))
}

/// 30 instances, 6 labels in three overlapping topics.
pub fn sgns_toy() -> LabelMatrix {
    let rows = (0..30u32)
        .map(|i| {
            let t = i % 3;
            let mut r = vec![2 * t, 2 * t + 1];
            if i % 5 == 0 {
                r.push((2 * t + 2) % 6);
            }
            r.sort_unstable();
            r
        })
        .collect();
    LabelMatrix::from_rows(6, rows).unwrap()
}

/// 6 points in 3 features, paired within two groups.
pub fn joint_toy() -> (SparseMatrix, Vec<(u32, u32)>) {
    let x = from_rows(&[
        vec![1.0, 0.2, 0.0],
        vec![0.9, 0.0, 0.1],
        vec![1.1, 0.1, 0.0],
        vec![0.0, 0.1, 1.0],
        vec![0.1, 0.0, 0.9],
        vec![0.0, 0.2, 1.2],
    ]);
    let mut pairs = Vec::new();
    for g in [[0u32, 1, 2], [3, 4, 5]] {
        for &a in &g {
            for &b in &g {
                if a != b {
                    pairs.push((a, b));
                }
            }
        }
    }
    (SparseMatrix::from_dense(&x), pairs)
}

/// Twelve instances with six features and six labels drawn from three
/// topics, plus six unseen queries.
pub fn e2e_dataset(seed: u64) -> (exmlds::Dataset, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for i in 0..12 {
        let t = i % 3;
        let row: Vec<f64> = (0..6)
            .map(|f| {
                let base = if f / 2 == t { 1.0 } else { 0.0 };
                base + r.random_range(0.0..0.6)
            })
            .collect();
        feats.push(row);
        let mut ls = vec![2 * t as u32];
        if r.random::<f64>() < 0.6 {
            ls.push(2 * t as u32 + 1);
        }
        if r.random::<f64>() < 0.25 {
            ls.push(r.random_range(0..6));
        }
        ls.sort_unstable();
        ls.dedup();
        labels.push(ls);
    }
    let queries = (0..6)
        .map(|_| (0..6).map(|_| r.random_range(0.0..1.5)).collect())
        .collect();
    let data = exmlds::Dataset::new(
        SparseMatrix::from_dense(&from_rows(&feats)),
        LabelMatrix::from_rows(6, labels).unwrap(),
    )
    .unwrap();
    (data, queries)
}

/// Trains the library with the single-partition pipeline and compares every
/// training row and query against [`StraightLine`]. Returns the number of
/// points compared.
pub fn end_to_end_check(seed: u64) -> Result<usize, String> {
    const DIM: usize = 3;
    const SHIFT: f64 = 2.0;
    const LAMBDA: f64 = 0.1;
    const K: usize = 3;
    let (data, queries) = e2e_dataset(seed);
    let x = to_rows(&data.features.to_dense());
    let labels: Vec<Vec<u32>> = data.labels.row_iter().map(<[u32]>::to_vec).collect();

    // The factorization is unique only when the kept spectrum is separated
    // from the rest.
    let mut m = vec![vec![0.0; 12]; 12];
    for i in 0..12 {
        for j in 0..12 {
            m[i][j] = labels[i].iter().filter(|l| labels[j].contains(l)).count() as f64;
        }
    }
    let (vals, _) = jacobi_eigen(&sppmi_loop(&m, SHIFT));
    let mut mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if mags[DIM - 1] - mags[DIM] < 1e-3 {
        return Err(format!("seed {seed}: spectrum not separated at rank {DIM}"));
    }

    let oracle = StraightLine::train(&x, &labels, 6, DIM, SHIFT, LAMBDA, K);
    let params = exmlds::HyperParams {
        dim: DIM,
        shift: SHIFT,
        lambda: Some(LAMBDA),
        clusters: Some(1),
        k_predict: K,
        ..exmlds::HyperParams::default()
    };
    let (model, _) = exmlds::train(&data, &params, None, &exmlds::TrainOptions::default())
        .map_err(|e| e.to_string())?;
    let points: Vec<&Vec<f64>> = x.iter().chain(&queries).collect();
    for (n, q) in points.iter().enumerate() {
        let sparse: Vec<(usize, f64)> = q
            .iter()
            .copied()
            .enumerate()
            .filter(|e| e.1 != 0.0)
            .collect();
        let got =
            exmlds::predict::predict_top_p(&sparse, &model, K, 6).map_err(|e| e.to_string())?;
        let want = rank_labels(&oracle.scores(q), 6);
        if got != want {
            return Err(format!(
                "seed {seed} point {n}: got {got:?}, oracle {want:?}"
            ));
        }
    }
    Ok(points.len())
}
