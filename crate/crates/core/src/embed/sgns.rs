//! Skip-gram negative sampling over instance context pairs.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pairs::ContextPairs;
use super::EmbeddingMatrix;
use crate::error::{check_dim, Error, Result};
use crate::hogwild::{AtomicRows, RowStore, UpdateMode};
use crate::linalg::{dot, DenseMatrix};

/// Similarity kernel between two embeddings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Similarity {
    #[default]
    Dot,
    Cosine,
}

impl Similarity {
    /// Cosine with a zero vector is 0.
    #[inline]
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Similarity::Dot => dot(a, b),
            Similarity::Cosine => crate::linalg::cosine(a, b),
        }
    }
}

/// `1 / (1 + e^{-x})` without overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x) = −softplus(−x)`, stable for large |x|.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    let t = -x;
    -(t.max(0.0) + (-t.abs()).exp().ln_1p())
}

/// Where negative samples are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum NegativeDistribution {
    /// Context frequency raised to the 0.75 power.
    #[default]
    Unigram,
    Uniform,
}

impl NegativeDistribution {
    /// Probability vector over the pair universe. Falls back to uniform when
    /// there are no pairs.
    pub fn probabilities(self, pairs: &ContextPairs) -> Vec<f64> {
        let n = pairs.universe();
        if n == 0 {
            return Vec::new();
        }
        let weights: Vec<f64> = match self {
            NegativeDistribution::Uniform => vec![1.0; n],
            NegativeDistribution::Unigram if pairs.is_empty() => vec![1.0; n],
            NegativeDistribution::Unigram => pairs
                .context_counts()
                .into_iter()
                .map(|c| (c as f64).powf(0.75))
                .collect(),
        };
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }
}

/// Expected SGNS objective with the given kernel:
/// `Σ_(i,j) [log σ(K_ij) + neg_ratio · Σ_j' P(j') log σ(−K_ij')]`.
///
/// The negative term is attached to every positive pair, matching the
/// sampler, which draws `neg_ratio` negatives per positive.
pub fn sgns_objective_with(
    z: &EmbeddingMatrix,
    pairs: &ContextPairs,
    neg_ratio: f64,
    neg_distribution: &[f64],
    similarity: Similarity,
) -> Result<f64> {
    check_dim("objective embedding rows", pairs.universe(), z.rows())?;
    check_dim("negative distribution", z.rows(), neg_distribution.len())?;
    let total: f64 = neg_distribution.iter().sum();
    if !neg_distribution.is_empty() && (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "negative distribution sums to {total}, not 1"
        )));
    }
    let positive: f64 = pairs
        .as_slice()
        .iter()
        .map(|&(i, j)| log_sigmoid(similarity.eval(z.row(i as usize), z.row(j as usize))))
        .sum();
    let mut negative = 0.0;
    for (i, &count) in pairs.source_counts().iter().enumerate() {
        if count == 0 {
            continue;
        }
        let expect: f64 = neg_distribution
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(j, &p)| p * log_sigmoid(-similarity.eval(z.row(i), z.row(j))))
            .sum();
        negative += count as f64 * expect;
    }
    Ok(positive + neg_ratio * negative)
}

/// Dot-product SGNS objective.
pub fn sgns_objective(
    z: &EmbeddingMatrix,
    pairs: &ContextPairs,
    neg_ratio: f64,
    neg_distribution: &[f64],
) -> Result<f64> {
    sgns_objective_with(z, pairs, neg_ratio, neg_distribution, Similarity::Dot)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    /// Negatives drawn per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    /// Initial rate; decays linearly to ~0 over all updates.
    pub learning_rate: f64,
    pub seed: u64,
    pub negative_distribution: NegativeDistribution,
    pub mode: UpdateMode,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            negatives: 15,
            epochs: 35,
            learning_rate: 0.025,
            seed: 42,
            negative_distribution: NegativeDistribution::Unigram,
            mode: UpdateMode::Deterministic,
        }
    }
}

impl SgnsConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("embedding dimension must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if let UpdateMode::Async { threads: 0 } = self.mode {
            return Err(Error::invalid("async mode needs at least one thread"));
        }
        Ok(())
    }
}

/// Standard SGNS start point: each coordinate uniform in `±0.5/dim`.
pub fn init_embeddings(count: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.5 / dim as f64;
    DenseMatrix::from_fn(count, dim, |_, _| rng.random_range(-h..h))
}

/// Learns embeddings by stochastic ascent on the SGNS objective.
pub fn sgns_sgd_embed(pairs: &ContextPairs, cfg: &SgnsConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let mut z = init_embeddings(pairs.universe(), cfg.dim, cfg.seed);
    sgns_sgd_train(&mut z, pairs, cfg, |_, _| {})?;
    Ok(z)
}

/// Runs `cfg.epochs` passes over `pairs` starting from `z`, calling
/// `on_epoch(epoch, z)` after each pass.
pub fn sgns_sgd_train(
    z: &mut EmbeddingMatrix,
    pairs: &ContextPairs,
    cfg: &SgnsConfig,
    mut on_epoch: impl FnMut(usize, &EmbeddingMatrix),
) -> Result<()> {
    cfg.validate()?;
    check_dim("embedding rows", pairs.universe(), z.rows())?;
    check_dim("embedding dimension", cfg.dim, z.cols())?;
    if pairs.is_empty() {
        for e in 0..cfg.epochs {
            on_epoch(e, z);
        }
        return Ok(());
    }
    let probs = cfg.negative_distribution.probabilities(pairs);
    let sampler = WeightedIndex::new(&probs).map_err(|e| Error::invalid(e.to_string()))?;
    let total_steps = (cfg.epochs * pairs.len()) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let base_step = epoch * pairs.len();
        match cfg.mode {
            UpdateMode::Deterministic => {
                let mut w = Worker::new(cfg.dim);
                for (t, &p) in order.iter().enumerate() {
                    let lr = decayed(cfg.learning_rate, base_step + t, total_steps);
                    w.step(
                        z,
                        pairs.as_slice()[p],
                        cfg.negatives,
                        &sampler,
                        &mut rng,
                        lr,
                    );
                }
            }
            UpdateMode::Async { threads } => {
                let shared = AtomicRows::from_dense(z);
                let chunk = order.len().div_ceil(threads);
                let seeds: Vec<u64> = (0..threads).map(|_| rng.random()).collect();
                std::thread::scope(|s| {
                    for (c, part) in order.chunks(chunk).enumerate() {
                        let (shared, sampler, seed) = (&shared, &sampler, seeds[c]);
                        s.spawn(move || {
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            let mut view = shared.view();
                            let mut w = Worker::new(cfg.dim);
                            for (t, &p) in part.iter().enumerate() {
                                // Workers advance in lockstep on average.
                                let step = base_step + t * threads + c;
                                let lr = decayed(cfg.learning_rate, step, total_steps);
                                w.step(
                                    &mut view,
                                    pairs.as_slice()[p],
                                    cfg.negatives,
                                    sampler,
                                    &mut rng,
                                    lr,
                                );
                            }
                        });
                    }
                });
                *z = shared.to_dense(z.rows());
            }
        }
        if !z.is_finite() {
            return Err(Error::NonFinite("sgns embeddings"));
        }
        on_epoch(epoch, z);
    }
    Ok(())
}

#[inline]
fn decayed(lr: f64, step: usize, total: f64) -> f64 {
    lr * (1.0 - step as f64 / total).max(1e-4)
}

/// Scratch buffers for one SGD update.
struct Worker {
    zi: Vec<f64>,
    zo: Vec<f64>,
    acc: Vec<f64>,
}

impl Worker {
    fn new(dim: usize) -> Self {
        Worker {
            zi: vec![0.0; dim],
            zo: vec![0.0; dim],
            acc: vec![0.0; dim],
        }
    }

    /// One positive pair plus `negatives` sampled contexts. The update to the
    /// source row is accumulated and applied last.
    fn step(
        &mut self,
        store: &mut impl RowStore,
        (i, j): (u32, u32),
        negatives: usize,
        sampler: &WeightedIndex<f64>,
        rng: &mut ChaCha8Rng,
        lr: f64,
    ) {
        let i = i as usize;
        store.read(i, &mut self.zi);
        self.acc.iter_mut().for_each(|a| *a = 0.0);
        let mut target = j as usize;
        let mut label = 1.0;
        for s in 0..=negatives {
            if s > 0 {
                target = sampler.sample(rng);
                label = 0.0;
            }
            if target == i {
                // d/dz log σ(±‖z‖²) = ±σ(∓‖z‖²)·2z
                let k = dot(&self.zi, &self.zi);
                let g = lr * (label - sigmoid(k)) * 2.0;
                crate::linalg::axpy(g, &self.zi, &mut self.acc);
                continue;
            }
            store.read(target, &mut self.zo);
            let g = lr * (label - sigmoid(dot(&self.zi, &self.zo)));
            crate::linalg::axpy(g, &self.zo, &mut self.acc);
            store.add(target, &self.zi, g);
        }
        store.add(i, &self.acc, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stable_log_sigmoid() {
        assert_abs_diff_eq!(log_sigmoid(0.0), -std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(log_sigmoid(1e6), 0.0);
        assert_abs_diff_eq!(log_sigmoid(-1e6), -1e6, epsilon = 1e-6);
        assert!(log_sigmoid(800.0).is_finite());
        assert_eq!(sigmoid(-1e6), 0.0);
        assert_eq!(sigmoid(1e6), 1.0);
    }

    #[test]
    fn zero_embeddings_objective() {
        let pairs = ContextPairs::new(4, vec![(0, 1), (1, 0), (2, 3)]).unwrap();
        let z = DenseMatrix::zeros(4, 3);
        let probs = NegativeDistribution::Unigram.probabilities(&pairs);
        let obj = sgns_objective(&z, &pairs, 5.0, &probs).unwrap();
        let expect = -(3.0 + 5.0 * 3.0) * std::f64::consts::LN_2;
        assert_abs_diff_eq!(obj, expect, epsilon = 1e-12);
    }

    #[test]
    fn saturated_positive_pair() {
        let pairs = ContextPairs::new(2, vec![(0, 1)]).unwrap();
        let z = DenseMatrix::from_rows(0, &[vec![1e4], vec![1e4]]).unwrap();
        let obj = sgns_objective(&z, &pairs, 0.0, &[0.5, 0.5]).unwrap();
        assert_eq!(obj, 0.0);
    }

    #[test]
    fn bad_distribution() {
        let pairs = ContextPairs::new(2, vec![(0, 1)]).unwrap();
        let z = DenseMatrix::zeros(2, 2);
        assert!(sgns_objective(&z, &pairs, 1.0, &[0.2, 0.2]).is_err());
        assert!(sgns_objective(&z, &pairs, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn no_pairs_keeps_initialization() {
        let pairs = ContextPairs::new(5, vec![]).unwrap();
        let cfg = SgnsConfig {
            dim: 4,
            epochs: 3,
            ..SgnsConfig::default()
        };
        let z = sgns_sgd_embed(&pairs, &cfg).unwrap();
        assert_eq!(z, init_embeddings(5, 4, cfg.seed));
    }

    #[test]
    fn unigram_weights() {
        let pairs = ContextPairs::new(3, vec![(0, 1), (2, 1), (1, 0)]).unwrap();
        let p = NegativeDistribution::Unigram.probabilities(&pairs);
        let w1 = 2f64.powf(0.75);
        assert_abs_diff_eq!(p[1], w1 / (w1 + 1.0), epsilon = 1e-15);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn invalid_config() {
        let pairs = ContextPairs::new(2, vec![(0, 1)]).unwrap();
        for cfg in [
            SgnsConfig {
                epochs: 0,
                ..SgnsConfig::default()
            },
            SgnsConfig {
                learning_rate: 0.0,
                ..SgnsConfig::default()
            },
            SgnsConfig {
                dim: 0,
                ..SgnsConfig::default()
            },
            SgnsConfig {
                mode: UpdateMode::Async { threads: 0 },
                ..SgnsConfig::default()
            },
        ] {
            assert!(sgns_sgd_embed(&pairs, &cfg).is_err());
        }
    }

    #[test]
    fn async_mode_runs() {
        let pairs =
            ContextPairs::new(6, vec![(0, 1), (1, 0), (2, 3), (3, 2), (4, 5), (5, 4)]).unwrap();
        let cfg = SgnsConfig {
            dim: 4,
            negatives: 2,
            epochs: 20,
            learning_rate: 0.1,
            mode: UpdateMode::Async { threads: 3 },
            ..SgnsConfig::default()
        };
        let z = sgns_sgd_embed(&pairs, &cfg).unwrap();
        assert!(z.is_finite());
        assert_eq!(z.rows(), 6);
    }
}
