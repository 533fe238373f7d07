mod common;

use common::*;
use exmlds::embed::{
    build_context_pairs, init_embeddings, sgns_objective, sgns_sgd_embed, sgns_sgd_train,
    ContextPairs, NegativeDistribution, SgnsConfig,
};
use exmlds::regress::{joint_sgd_v, JointSgdConfig};
use exmlds::{DenseMatrix, LabelMatrix, Similarity};
use proptest::prelude::*;
use rand::Rng;

fn toy_config(seed: u64) -> SgnsConfig {
    SgnsConfig {
        dim: 8,
        negatives: 5,
        epochs: 20,
        seed,
        ..SgnsConfig::default()
    }
}

#[test]
fn sgns_improves_objective() {
    let pairs = build_context_pairs(&sgns_toy(), 3).unwrap();
    for seed in 0..5 {
        let cfg = toy_config(seed);
        let probs = cfg.negative_distribution.probabilities(&pairs);
        let z0 = init_embeddings(pairs.universe(), cfg.dim, seed);
        let z = sgns_sgd_embed(&pairs, &cfg).unwrap();
        let before = sgns_objective(&z0, &pairs, 5.0, &probs).unwrap();
        let after = sgns_objective(&z, &pairs, 5.0, &probs).unwrap();
        assert!(after - before > 0.0, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn joint_sgd_improves_objective() {
    let (x, pairs) = joint_toy();
    let pairs = ContextPairs::new(6, pairs).unwrap();
    for seed in 0..5 {
        let cfg = JointSgdConfig {
            dim: 2,
            negatives: 2,
            epochs: 5,
            eta: 0.05,
            seed,
            ..JointSgdConfig::default()
        };
        let fit = joint_sgd_v(&x, &pairs, &cfg, None).unwrap();
        let o = &fit.objectives;
        assert_eq!(o.len(), 6);
        assert!(o.windows(2).all(|w| w[1] > w[0]), "seed {seed}: {o:?}");

        let cos = JointSgdConfig {
            similarity: Similarity::Cosine,
            epochs: 20,
            ..cfg
        };
        let fit = joint_sgd_v(&x, &pairs, &cos, None).unwrap();
        assert!(fit.regressor.v.is_finite());
        assert!(fit.objectives.last().unwrap() >= &fit.objectives[0]);
    }
}

#[test]
fn no_pairs_keeps_initialization() {
    let pairs = ContextPairs::new(4, Vec::new()).unwrap();
    let z = sgns_sgd_embed(&pairs, &toy_config(3)).unwrap();
    assert_eq!(z, init_embeddings(4, 8, 3));
}

#[test]
fn mutual_pair_inner_product_grows() {
    let pairs = ContextPairs::new(2, vec![(0, 1), (1, 0)]).unwrap();
    let cfg = SgnsConfig {
        dim: 4,
        negatives: 1,
        epochs: 50,
        negative_distribution: NegativeDistribution::Uniform,
        ..SgnsConfig::default()
    };
    let mut z = init_embeddings(2, 4, cfg.seed);
    let mut track = vec![];
    sgns_sgd_train(&mut z, &pairs, &cfg, |epoch, z| {
        if epoch % 10 == 9 {
            track.push(
                z.row(0)
                    .iter()
                    .zip(z.row(1))
                    .map(|(a, b)| a * b)
                    .sum::<f64>(),
            );
        }
    })
    .unwrap();
    assert!(track.windows(2).all(|w| w[1] > w[0]), "{track:?}");
}

#[test]
fn identical_rows_tie_to_lowest_index() {
    let y = LabelMatrix::from_rows(2, vec![vec![0, 1]; 3]).unwrap();
    let pairs = build_context_pairs(&y, 1).unwrap();
    assert_eq!(pairs.as_slice(), &[(0, 1), (1, 0), (2, 0)]);
    let y = LabelMatrix::from_rows(3, vec![vec![0], vec![1], vec![2]]).unwrap();
    assert_eq!(
        build_context_pairs(&y, 1).unwrap().as_slice(),
        &[(0, 1), (1, 0), (2, 0)]
    );
}

fn pairs_oracle(y: &LabelMatrix, k: usize) -> Vec<(u32, u32)> {
    let rows = to_rows(&y.to_dense());
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (j, _) in knn_brute(row, &rows, k, Some(i)) {
            out.push((i as u32, j as u32));
        }
    }
    out.sort_unstable();
    out
}

#[test]
fn context_pairs_match_exhaustive_search() {
    let mut r = rng(20);
    for _ in 0..10 {
        let y = random_labels(&mut r, 20, 8, 0.25);
        let mut got = build_context_pairs(&y, 5).unwrap().as_slice().to_vec();
        got.sort_unstable();
        assert_eq!(got, pairs_oracle(&y, 5));
    }
}

fn random_orthogonal(seed: u64, n: usize) -> DenseMatrix {
    let mut r = rng(seed);
    let s = random_counts(&mut r, n, 100, true);
    let (_, vecs) = jacobi_eigen(&s);
    from_rows(&vecs)
}

#[test]
fn objective_matches_direct_summation() {
    let mut r = rng(23);
    let z = DenseMatrix::from_fn(5, 2, |_, _| r.random_range(-1.0..1.0));
    let raw = vec![(0, 1), (1, 2), (3, 4), (4, 3), (2, 0)];
    let pairs = ContextPairs::new(5, raw.clone()).unwrap();
    let probs = NegativeDistribution::Unigram.probabilities(&pairs);
    let dot = |a: usize, b: usize| {
        z.row(a)
            .iter()
            .zip(z.row(b))
            .map(|(x, y)| x * y)
            .sum::<f64>()
    };
    let ls = |t: f64| (1.0 / (1.0 + (-t).exp())).ln();
    let mut want = 0.0;
    for &(i, j) in &raw {
        want += ls(dot(i as usize, j as usize));
        for (n, p) in probs.iter().enumerate() {
            want += 3.0 * p * ls(-dot(i as usize, n));
        }
    }
    let got = sgns_objective(&z, &pairs, 3.0, &probs).unwrap();
    assert!((got - want).abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn objective_rotation_invariant(seed in any::<u64>(), n in 3usize..10, d in 2usize..6) {
        let mut r = rng(seed);
        let z = DenseMatrix::from_fn(n, d, |_, _| r.random_range(-2.0..2.0));
        let raw: Vec<(u32, u32)> = (0..3 * n)
            .map(|_| (r.random_range(0..n as u32), r.random_range(0..n as u32)))
            .filter(|(a, b)| a != b)
            .collect();
        let pairs = ContextPairs::new(n, raw).unwrap();
        let probs = NegativeDistribution::Unigram.probabilities(&pairs);
        let q = random_orthogonal(seed, d);
        let zr = z.matmul(&q).unwrap();
        let a = sgns_objective(&z, &pairs, 4.0, &probs).unwrap();
        let b = sgns_objective(&zr, &pairs, 4.0, &probs).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn sgd_stays_finite(seed in any::<u64>(), lr in 0.001f64..0.1) {
        let pairs = build_context_pairs(&sgns_toy(), 4).unwrap();
        let mut r = rng(seed);
        let mut z = DenseMatrix::from_fn(30, 5, |_, _| r.random_range(-1.0..1.0));
        for i in 0..30 {
            let n = z.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            z.row_mut(i).iter_mut().for_each(|v| *v /= n);
        }
        let cfg = SgnsConfig { dim: 5, epochs: 10, learning_rate: lr, seed, ..SgnsConfig::default() };
        sgns_sgd_train(&mut z, &pairs, &cfg, |_, _| {}).unwrap();
        prop_assert!(z.is_finite());
    }
}
