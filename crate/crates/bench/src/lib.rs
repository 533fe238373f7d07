//! Synthetic multi-label data for benchmarks and smoke runs.

use exmlds::{Dataset, LabelMatrix, SparseMatrix};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of a generated dataset.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticSpec {
    pub instances: usize,
    pub features: usize,
    pub labels: usize,
    /// Latent groups shared by features and labels.
    pub topics: usize,
    /// Nonzero features per instance.
    pub active_features: usize,
    /// Maximum labels per instance.
    pub max_labels: usize,
    /// Fraction of features drawn outside the instance's topic.
    pub noise: f64,
}

impl SyntheticSpec {
    /// Roughly the size of Bibtex.
    pub fn bibtex_like() -> Self {
        SyntheticSpec {
            instances: 4880,
            features: 1836,
            labels: 159,
            topics: 40,
            active_features: 60,
            max_labels: 4,
            noise: 0.3,
        }
    }

    pub fn small() -> Self {
        SyntheticSpec {
            instances: 500,
            features: 200,
            labels: 30,
            topics: 8,
            active_features: 15,
            max_labels: 3,
            noise: 0.2,
        }
    }
}

/// Topic-structured data: each instance belongs to one topic and draws most
/// of its features and all of its labels from that topic's pool.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f_pool = (spec.features / spec.topics).max(spec.active_features);
    let l_pool = (spec.labels / spec.topics)
        .max(spec.max_labels)
        .min(spec.labels);
    let topic_features: Vec<Vec<usize>> = (0..spec.topics)
        .map(|_| sample(&mut rng, spec.features, f_pool.min(spec.features)).into_vec())
        .collect();
    let topic_labels: Vec<Vec<usize>> = (0..spec.topics)
        .map(|_| sample(&mut rng, spec.labels, l_pool).into_vec())
        .collect();
    let mut features = Vec::with_capacity(spec.instances);
    let mut labels = Vec::with_capacity(spec.instances);
    for _ in 0..spec.instances {
        let t = rng.random_range(0..spec.topics);
        let mut row: Vec<(u32, f64)> = Vec::with_capacity(spec.active_features);
        for _ in 0..spec.active_features {
            let f = if rng.random::<f64>() < spec.noise {
                rng.random_range(0..spec.features)
            } else {
                topic_features[t][rng.random_range(0..f_pool.min(spec.features))]
            };
            row.push((f as u32, 1.0));
        }
        row.sort_by_key(|e| e.0);
        row.dedup_by_key(|e| e.0);
        features.push(row);
        let count = rng.random_range(1..=spec.max_labels.min(l_pool));
        labels.push(
            sample(&mut rng, l_pool, count)
                .into_iter()
                .map(|j| topic_labels[t][j] as u32)
                .collect(),
        );
    }
    Dataset::new(
        SparseMatrix::from_rows(spec.features, features).expect("valid rows"),
        LabelMatrix::from_rows(spec.labels, labels).expect("valid labels"),
    )
    .expect("matching rows")
}

/// Splits off the last `test` rows.
pub fn split(data: &Dataset, test: usize) -> (Dataset, Dataset) {
    let n = data.len();
    let cut = n - test.min(n);
    let take = |r: std::ops::Range<usize>| {
        let rows: Vec<usize> = r.collect();
        Dataset::new(
            data.features.select_rows(&rows),
            data.labels.select_rows(&rows),
        )
        .expect("matching rows")
    };
    (take(0..cut), take(cut..n))
}
