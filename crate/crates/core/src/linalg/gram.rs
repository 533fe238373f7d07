use rayon::prelude::*;

use super::sparse::{CooccurrenceMatrix, LabelMatrix, SparseBuilder};

/// Instance–instance inner products of label rows, `M = Y Yᵀ`.
///
/// The diagonal holds `‖yᵢ‖²`; pairs with disjoint supports are not stored.
pub fn gram(labels: &LabelMatrix) -> CooccurrenceMatrix {
    let n = labels.rows();
    let postings = labels.label_postings();
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0u32; n], Vec::new()),
            |(acc, touched), i| {
                for &l in labels.row(i) {
                    for &j in &postings[l as usize] {
                        if acc[j as usize] == 0 {
                            touched.push(j);
                        }
                        acc[j as usize] += 1;
                    }
                }
                touched.sort_unstable();
                let row = touched
                    .iter()
                    .map(|&j| (j, f64::from(std::mem::take(&mut acc[j as usize]))))
                    .collect();
                touched.clear();
                row
            },
        )
        .collect();
    let mut b = SparseBuilder::new(n);
    for r in rows {
        for (j, v) in r {
            b.push(j, v);
        }
        b.finish_row();
    }
    b.build()
}

/// Label–label co-occurrence counts, `C = Yᵀ Y`.
pub fn label_cooccurrence(labels: &LabelMatrix) -> CooccurrenceMatrix {
    let num_labels = labels.num_labels();
    let mut acc = vec![0u32; num_labels];
    let mut touched = Vec::new();
    let mut b = SparseBuilder::new(num_labels);
    // Co-occurrence of label a with b = Σ over instances containing a.
    let postings = labels.label_postings();
    for post in &postings {
        for &i in post {
            for &l in labels.row(i as usize) {
                if acc[l as usize] == 0 {
                    touched.push(l);
                }
                acc[l as usize] += 1;
            }
        }
        touched.sort_unstable();
        for &l in &touched {
            b.push(l, f64::from(std::mem::take(&mut acc[l as usize])));
        }
        touched.clear();
        b.finish_row();
    }
    b.build()
}
