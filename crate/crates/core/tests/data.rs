mod common;

use common::*;
use exmlds::data::{
    build_label_cooccurrence, parse_xmlc_dataset, read_mask_manifest, write_mask_manifest,
};
use exmlds::{mask_labels, write_xmlc_dataset, Dataset, LabelMatrix, SparseMatrix};
use proptest::prelude::*;

const SAMPLE: &str = "3 4 3\n0,2 0:1.5 3:0.25\n 1:2\n1 0:1 1:1 2:1 3:1\n";

#[test]
fn parses_sample() {
    let d = parse_xmlc_dataset(SAMPLE.as_bytes()).unwrap();
    assert_eq!((d.len(), d.num_features(), d.num_labels()), (3, 4, 3));
    assert_eq!(d.labels.row(0), &[0, 2]);
    assert!(d.labels.row(1).is_empty());
    assert_eq!(d.features.get(0, 3), 0.25);
    assert_eq!(d.features.get(1, 1), 2.0);
}

#[test]
fn malformed_inputs_rejected() {
    for bad in [
        "",
        "2 3 2\n0 0:1\n",
        "1 3 2\n5 0:1\n",
        "1 3 2\n0 7:1\n",
        "1 3 2\n0 0:x\n",
        "1 3 2\n0 0:1 0:2\n",
        "1 3\n0 0:1\n",
    ] {
        assert!(parse_xmlc_dataset(bad.as_bytes()).is_err(), "{bad:?}");
    }
}

#[test]
fn mask_counts() {
    let y = random_labels(&mut rng(1), 200, 20, 0.2);
    let nnz = y.nnz();
    for f in [0.0, 0.3, 0.8, 1.0] {
        let m = mask_labels(&y, f, 9).unwrap();
        let hide = (f * nnz as f64).round() as usize;
        assert_eq!(m.masked.nnz(), nnz - hide);
        assert_eq!(m.hidden.len(), hide);
        for &(i, l) in &m.hidden {
            assert!(y.contains(i, l) && !m.masked.contains(i, l));
        }
    }
    assert_eq!(mask_labels(&y, 0.0, 1).unwrap().masked, y);
    assert!(mask_labels(&y, 1.5, 1).is_err());
}

#[test]
fn manifest_round_trip() {
    let y = random_labels(&mut rng(2), 30, 6, 0.3);
    let m = mask_labels(&y, 0.5, 4).unwrap();
    let mut buf = Vec::new();
    write_mask_manifest(&m, &mut buf).unwrap();
    let (f, s, hidden) = read_mask_manifest(buf.as_slice()).unwrap();
    assert_eq!((f, s, hidden), (0.5, 4, m.hidden));
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..8, 1usize..6, 1usize..5).prop_flat_map(|(n, d, l)| {
        let row = (
            prop::collection::btree_set(0..l as u32, 0..=l),
            prop::collection::btree_map(0..d as u32, -1e6f64..1e6, 0..=d),
        );
        prop::collection::vec(row, n).prop_map(move |rows| {
            let (labels, feats): (Vec<_>, Vec<_>) = rows
                .into_iter()
                .map(|(ls, fs)| {
                    (
                        ls.into_iter().collect::<Vec<u32>>(),
                        fs.into_iter().collect::<Vec<(u32, f64)>>(),
                    )
                })
                .unzip();
            Dataset::new(
                SparseMatrix::from_rows(d, feats).unwrap(),
                LabelMatrix::from_rows(l, labels).unwrap(),
            )
            .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn serialize_parse_round_trip(d in dataset_strategy()) {
        let mut buf = Vec::new();
        write_xmlc_dataset(&d, &mut buf).unwrap();
        let back = parse_xmlc_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn masking_is_reproducible(seed in any::<u64>(), f in 0.0f64..=1.0) {
        let y = random_labels(&mut rng(seed), 20, 5, 0.4);
        prop_assert_eq!(mask_labels(&y, f, seed).unwrap(), mask_labels(&y, f, seed).unwrap());
    }

    #[test]
    fn cooccurrence_symmetric_with_trace_nnz(seed in any::<u64>(), n in 1usize..30, l in 1usize..8) {
        let y = random_labels(&mut rng(seed), n, l, 0.3);
        let c = build_label_cooccurrence(&y);
        prop_assert_eq!(c.asymmetry(), Some(0.0));
        let trace: f64 = (0..l).map(|i| c.get(i, i)).sum();
        prop_assert_eq!(trace, y.nnz() as f64);
    }
}
