#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use exmlds::linalg::{gram, label_cooccurrence};
use exmlds::sppmi::{build_joint_matrix, pmi, sppmi};
use exmlds::JointWeights;
use proptest::prelude::*;

#[test]
fn sppmi_matches_double_loop() {
    let mut r = rng(6);
    for _ in 0..25 {
        let counts = random_counts(&mut r, 10, 6, false);
        let m = dense_counts(&counts);
        for k in [1.0, 2.0, 5.0, 10.0, 15.0] {
            let got = sppmi(&m, k).unwrap().matrix.to_dense();
            let want = sppmi_loop(&counts, k);
            for i in 0..10 {
                for j in 0..10 {
                    assert!(
                        (got.get(i, j) - want[i][j]).abs() <= 1e-12,
                        "k={k} ({i},{j})"
                    );
                }
            }
        }
    }
}

#[test]
fn pmi_matches_double_loop() {
    let mut r = rng(7);
    for _ in 0..6 {
        let counts = random_counts(&mut r, 10, 4, false);
        let p = pmi(&dense_counts(&counts)).unwrap();
        let total: f64 = counts.iter().flatten().sum();
        for i in 0..10 {
            let ri: f64 = counts[i].iter().sum();
            for j in 0..10 {
                let cj: f64 = counts.iter().map(|row| row[j]).sum();
                match p.get(i, j) {
                    Some(v) => {
                        let want = (counts[i][j] * total / (ri * cj)).ln();
                        assert!((v - want).abs() <= 1e-12);
                    }
                    None => assert_eq!(counts[i][j], 0.0),
                }
            }
        }
    }
}

#[test]
fn zero_counts_rejected() {
    let m = dense_counts(&vec![vec![0.0; 3]; 3]);
    assert!(sppmi(&m, 2.0).is_err());
    assert!(sppmi(&dense_counts(&[vec![1.0]]), 0.5).is_err());
}

#[test]
fn joint_block_layout() {
    let y = random_labels(&mut rng(3), 7, 4, 0.4);
    let m = gram(&y);
    let c = label_cooccurrence(&y);
    let w = JointWeights {
        mu1: 2.0,
        mu2: 3.0,
        mu3: 0.5,
    };
    let j = build_joint_matrix(&m, &y, &c, w).unwrap().to_dense();
    assert_eq!(j.rows(), 11);
    let yd = y.to_dense();
    for a in 0..11 {
        for b in 0..11 {
            let want = match (a < 7, b < 7) {
                (true, true) => 3.0 * m.get(a, b),
                (true, false) => 0.5 * yd.get(a, b - 7),
                (false, true) => 0.5 * yd.get(b, a - 7),
                (false, false) => 2.0 * c.get(a - 7, b - 7),
            };
            assert_eq!(j.get(a, b), want);
        }
    }
}

fn counts_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..8).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(0u32..6, n), n).prop_map(|m| {
            m.into_iter()
                .map(|r| r.into_iter().map(f64::from).collect())
                .collect()
        })
    })
}

fn nonzero(m: &[Vec<f64>]) -> bool {
    m.iter().flatten().any(|&v| v > 0.0)
}

proptest! {
    #[test]
    fn sppmi_nonincreasing_in_shift(m in counts_strategy(), k1 in 1.0f64..10.0, dk in 0.0f64..10.0) {
        prop_assume!(nonzero(&m));
        let c = dense_counts(&m);
        let lo = sppmi(&c, k1).unwrap().matrix.to_dense();
        let hi = sppmi(&c, k1 + dk).unwrap().matrix.to_dense();
        for (a, b) in lo.as_slice().iter().zip(hi.as_slice()) {
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn sppmi_scale_invariant(m in counts_strategy(), s in 0.01f64..100.0, k in 1.0f64..5.0) {
        prop_assume!(nonzero(&m));
        let c = dense_counts(&m);
        let a = sppmi(&c, k).unwrap().matrix.to_dense();
        let b = sppmi(&c.scaled(s), k).unwrap().matrix.to_dense();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn joint_matrix_symmetric(seed in any::<u64>(), n in 1usize..9, l in 1usize..6,
                              mu in (0.0f64..3.0, 0.0f64..3.0, 0.1f64..3.0)) {
        let y = random_labels(&mut rng(seed), n, l, 0.5);
        let w = JointWeights { mu1: mu.0, mu2: mu.1, mu3: mu.2 };
        let j = build_joint_matrix(&gram(&y), &y, &label_cooccurrence(&y), w).unwrap();
        prop_assert_eq!(j.asymmetry(), Some(0.0));
    }

    #[test]
    fn instance_only_block_matches_sppmi(seed in any::<u64>(), n in 2usize..9, l in 1usize..6,
                                         mu2 in 0.1f64..5.0, k in 1.0f64..5.0) {
        let y = random_labels(&mut rng(seed), n, l, 0.5);
        prop_assume!(y.nnz() > 0);
        let m = gram(&y);
        let w = JointWeights { mu1: 0.0, mu2, mu3: 0.0 };
        let j = build_joint_matrix(&m, &y, &label_cooccurrence(&y), w).unwrap();
        let joint = sppmi(&j, k).unwrap().matrix.to_dense();
        let plain = sppmi(&m, k).unwrap().matrix.to_dense();
        for a in 0..n + l {
            for b in 0..n + l {
                if a < n && b < n {
                    prop_assert!((joint.get(a, b) - plain.get(a, b)).abs() <= 1e-12);
                } else {
                    prop_assert_eq!(joint.get(a, b), 0.0);
                }
            }
        }
    }
}
