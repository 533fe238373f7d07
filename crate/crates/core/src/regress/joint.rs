//! Stochastic ascent on the SGNS objective directly in terms of the
//! regressor, `zᵢ = V xᵢ`.
//!
//! For a positive pair `(i, j)` and sampled negatives `j'` the step is
//! `V ← V + η [σ(−K_ij) ∇K_ij − Σ_j' σ(K_ij') ∇K_ij']`, with `∇K` the dot or
//! cosine gradient. Internally the update is applied to `Vᵀ`, whose rows are
//! indexed by feature so that sparse inputs touch only their support.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grad::COSINE_EPS;
use super::Regressor;
use crate::embed::{sgns_objective_with, sigmoid, ContextPairs, NegativeDistribution, Similarity};
use crate::error::{check_dim, Error, Result};
use crate::hogwild::{AtomicRows, RowStore, UpdateMode};
use crate::linalg::{axpy, dot, norm, DenseMatrix, SparseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct JointSgdConfig {
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Constant step size η.
    pub eta: f64,
    pub similarity: Similarity,
    pub seed: u64,
    pub negative_distribution: NegativeDistribution,
    pub mode: UpdateMode,
    /// Evaluate the expected objective before training and after each epoch.
    pub track_objective: bool,
}

impl Default for JointSgdConfig {
    fn default() -> Self {
        JointSgdConfig {
            dim: 100,
            negatives: 15,
            epochs: 35,
            eta: 0.01,
            similarity: Similarity::Dot,
            seed: 42,
            negative_distribution: NegativeDistribution::Uniform,
            mode: UpdateMode::Deterministic,
            track_objective: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JointSgdFit {
    pub regressor: Regressor,
    /// Objective at initialization followed by one value per epoch; empty
    /// when tracking is off.
    pub objectives: Vec<f64>,
}

/// SGNS objective of the embeddings `Z = X Vᵀ`.
pub fn joint_objective(
    x: &SparseMatrix,
    v: &DenseMatrix,
    pairs: &ContextPairs,
    negatives: usize,
    probs: &[f64],
    similarity: Similarity,
) -> Result<f64> {
    let z = x.mul_dense(&v.transpose())?;
    sgns_objective_with(&z, pairs, negatives as f64, probs, similarity)
}

/// Small random start in `±0.5/dim`.
pub fn init_regressor(dim: usize, features: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.5 / dim as f64;
    DenseMatrix::from_fn(dim, features, |_, _| rng.random_range(-h..h))
}

/// Learns `V` (`dim × d`) by stochastic ascent from `init`, or from a small
/// random start.
pub fn joint_sgd_v(
    x: &SparseMatrix,
    pairs: &ContextPairs,
    cfg: &JointSgdConfig,
    init: Option<&DenseMatrix>,
) -> Result<JointSgdFit> {
    check_dim("pair universe", x.rows(), pairs.universe())?;
    if cfg.dim == 0 {
        return Err(Error::invalid("embedding dimension must be >= 1"));
    }
    if !(cfg.eta > 0.0) || !cfg.eta.is_finite() {
        return Err(Error::invalid("step size must be positive"));
    }
    if let UpdateMode::Async { threads: 0 } = cfg.mode {
        return Err(Error::invalid("async mode needs at least one thread"));
    }
    let v0 = match init {
        Some(v) => {
            check_dim("initial regressor rows", cfg.dim, v.rows())?;
            check_dim("initial regressor cols", x.cols(), v.cols())?;
            v.clone()
        }
        None => init_regressor(cfg.dim, x.cols(), cfg.seed),
    };
    let probs = cfg.negative_distribution.probabilities(pairs);
    let mut objectives = Vec::new();
    if cfg.track_objective {
        objectives.push(joint_objective(
            x,
            &v0,
            pairs,
            cfg.negatives,
            &probs,
            cfg.similarity,
        )?);
    }
    let mut wt = v0.transpose();
    if !pairs.is_empty() && cfg.epochs > 0 {
        let sampler = WeightedIndex::new(&probs).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x101d_5eed);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            match cfg.mode {
                UpdateMode::Deterministic => {
                    let mut s = Stepper::new(cfg);
                    for &p in &order {
                        s.step(&mut wt, x, pairs.as_slice()[p], &sampler, &mut rng);
                    }
                }
                UpdateMode::Async { threads } => {
                    let shared = AtomicRows::from_dense(&wt);
                    let chunk = order.len().div_ceil(threads);
                    let seeds: Vec<u64> = (0..threads).map(|_| rng.random()).collect();
                    std::thread::scope(|sc| {
                        for (c, part) in order.chunks(chunk).enumerate() {
                            let (shared, sampler, seed) = (&shared, &sampler, seeds[c]);
                            sc.spawn(move || {
                                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                                let mut view = shared.view();
                                let mut s = Stepper::new(cfg);
                                for &p in part {
                                    s.step(&mut view, x, pairs.as_slice()[p], sampler, &mut rng);
                                }
                            });
                        }
                    });
                    wt = shared.to_dense(wt.rows());
                }
            }
            if !wt.is_finite() {
                return Err(Error::NonFinite("joint regressor"));
            }
            if cfg.track_objective {
                let obj = joint_objective(
                    x,
                    &wt.transpose(),
                    pairs,
                    cfg.negatives,
                    &probs,
                    cfg.similarity,
                )?;
                log::debug!("joint sgd epoch {}: objective {obj:.6}", objectives.len());
                objectives.push(obj);
            }
        }
    }
    Ok(JointSgdFit {
        regressor: Regressor {
            v: wt.transpose(),
            lambda: 0.0,
            similarity: cfg.similarity,
        },
        objectives,
    })
}

struct Stepper<'c> {
    cfg: &'c JointSgdConfig,
    row: Vec<f64>,
    /// Embeddings of the anchor and of each target at the start of the step.
    zs: Vec<Vec<f64>>,
    targets: Vec<(usize, f64)>,
    ui: Vec<f64>,
    ub: Vec<f64>,
}

impl<'c> Stepper<'c> {
    fn new(cfg: &'c JointSgdConfig) -> Self {
        Stepper {
            cfg,
            row: vec![0.0; cfg.dim],
            zs: Vec::new(),
            targets: Vec::new(),
            ui: vec![0.0; cfg.dim],
            ub: vec![0.0; cfg.dim],
        }
    }

    fn embed(&mut self, wt: &impl RowStore, x: &SparseMatrix, i: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.cfg.dim];
        for (f, xv) in x.row_entries(i) {
            wt.read(f, &mut self.row);
            axpy(xv, &self.row, &mut z);
        }
        z
    }

    fn step(
        &mut self,
        wt: &mut impl RowStore,
        x: &SparseMatrix,
        (i, j): (u32, u32),
        sampler: &WeightedIndex<f64>,
        rng: &mut ChaCha8Rng,
    ) {
        let i = i as usize;
        self.targets.clear();
        self.targets.push((j as usize, 1.0));
        for _ in 0..self.cfg.negatives {
            self.targets.push((sampler.sample(rng), 0.0));
        }
        let zi = self.embed(wt, x, i);
        let mut zs = std::mem::take(&mut self.zs);
        zs.clear();
        for t in 0..self.targets.len() {
            let b = self.targets[t].0;
            zs.push(self.embed(wt, x, b));
        }
        let eta = self.cfg.eta;
        for (&(b, label), zb) in self.targets.iter().zip(&zs) {
            // ∇K = Σ_f∈xᵢ xᵢf·uᵢ e_f + Σ_f∈x_b x_bf·u_b e_f (rows of Vᵀ)
            let k = match self.cfg.similarity {
                Similarity::Dot => {
                    self.ui.copy_from_slice(zb);
                    self.ub.copy_from_slice(&zi);
                    dot(&zi, zb)
                }
                Similarity::Cosine => {
                    let (ni, nb) = (norm(&zi), norm(zb));
                    if ni <= COSINE_EPS || nb <= COSINE_EPS {
                        continue;
                    }
                    let a = dot(&zi, zb);
                    let (bi, cb) = (1.0 / ni, 1.0 / nb);
                    for d in 0..zi.len() {
                        self.ui[d] = bi * cb * zb[d] - a * bi.powi(3) * cb * zi[d];
                        self.ub[d] = bi * cb * zi[d] - a * bi * cb.powi(3) * zb[d];
                    }
                    a * bi * cb
                }
            };
            let coef = eta * (label - sigmoid(k));
            for (f, xv) in x.row_entries(i) {
                wt.add(f, &self.ui, coef * xv);
            }
            for (f, xv) in x.row_entries(b) {
                wt.add(f, &self.ub, coef * xv);
            }
        }
        self.zs = zs;
    }
}
